//! Variational-circuit models: a one-vs-all margin classifier over ten
//! 6-qubit circuits, and a 10-qubit probability-readout image reconstructor.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::checkpoint::{Checkpoint, StoredAdam};
use crate::dataset::MeasurementDataset;
use crate::error::{Error, Result};
use crate::history::{EpochRecord, History, Shuffler, TrainConfig};
use crate::optim::{AdamConfig, AdamState};
use crate::qsim::{embed_real, z0_real, AnsatzSpec, PreparedAnsatz};

pub const N_CLASSES: usize = 10;
pub const CLASSIFIER_QUBITS: usize = 6;
pub const RECONSTRUCTOR_QUBITS: usize = 10;
pub const DEFAULT_MARGIN: f64 = 0.15;
pub const DEFAULT_QUANTUM_LR: f64 = 0.01;

const CLASSIFIER_KIND: &str = "quantum-classifier";
const RECONSTRUCTOR_KIND: &str = "quantum-reconstructor";

/// `n_classes · (n_qubits · (n_layers + 1) + 1)`.
pub fn classifier_parameter_count(n_classes: usize, n_qubits: usize, n_layers: usize) -> usize {
    n_classes * (n_qubits * (n_layers + 1) + 1)
}

/// Training defaults for the circuit models: Adam at lr 0.01.
pub fn quantum_train_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 64,
        adam: AdamConfig::with_lr(DEFAULT_QUANTUM_LR),
        seed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumClassifier {
    circuits: Vec<AnsatzSpec>,
    biases: Vec<f64>,
    delta: f64,
    adam: Option<AdamState>,
}

impl QuantumClassifier {
    /// Ten circuits with angles uniform in `[0, 2π)`, zero biases, Δ = 0.15.
    pub fn new(n_layers: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let circuits = (0..N_CLASSES)
            .map(|_| AnsatzSpec::random(CLASSIFIER_QUBITS, n_layers, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(circuits, vec![0.0; N_CLASSES], DEFAULT_MARGIN)
    }

    pub fn from_parts(circuits: Vec<AnsatzSpec>, biases: Vec<f64>, delta: f64) -> Result<Self> {
        if circuits.is_empty() || circuits.len() != biases.len() {
            return Err(Error::Dimension(format!(
                "{} circuits with {} biases",
                circuits.len(),
                biases.len()
            )));
        }
        let (nq, nl) = (circuits[0].n_qubits(), circuits[0].n_layers());
        if circuits.iter().any(|c| c.n_qubits() != nq || c.n_layers() != nl) {
            return Err(Error::Dimension("all circuits must share one shape".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::Argument(format!("margin {delta} must be positive")));
        }
        Ok(Self {
            circuits,
            biases,
            delta,
            adam: None,
        })
    }

    pub fn circuits(&self) -> &[AnsatzSpec] {
        &self.circuits
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n_layers(&self) -> usize {
        self.circuits[0].n_layers()
    }

    pub fn n_qubits(&self) -> usize {
        self.circuits[0].n_qubits()
    }

    pub fn n_classes(&self) -> usize {
        self.circuits.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.circuits.iter().map(AnsatzSpec::n_params).sum::<usize>() + self.biases.len()
    }

    fn prepare(&self) -> Vec<PreparedAnsatz> {
        self.circuits.iter().map(PreparedAnsatz::new).collect()
    }

    /// `⟨Z_0⟩` of every circuit on the embedded features, plus its bias.
    pub fn scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        let prepared = self.prepare();
        let (raw, _) = self.raw_scores(&prepared, features)?;
        Ok(raw.iter().zip(&self.biases).map(|(z, b)| z + b).collect())
    }

    /// Raw expectations and final states for one sample.
    fn raw_scores(&self, prepared: &[PreparedAnsatz], features: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let input = embed_real(features, self.n_qubits())?;
        let mut scratch = vec![0.0; input.len()];
        let mut zs = Vec::with_capacity(prepared.len());
        let mut states = Vec::with_capacity(prepared.len());
        for p in prepared {
            let mut s = input.clone();
            p.forward(&mut s, &mut scratch);
            zs.push(z0_real(&s));
            states.push(s);
        }
        Ok((zs, states))
    }

    /// Highest score wins; the lowest index breaks exact ties.
    pub fn predict(&self, features: &[f64]) -> Result<u8> {
        Ok(crate::nn::argmax(&self.scores(features)?) as u8)
    }

    /// Predictions for every row, evaluated in parallel.
    pub fn predict_batch(&self, features: ArrayView2<f64>) -> Result<Vec<u8>> {
        let prepared = self.prepare();
        let rows: Vec<Vec<f64>> = features.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.par_iter()
            .map(|x| {
                let (z, _) = self.raw_scores(&prepared, x)?;
                let s: Vec<f64> = z.iter().zip(&self.biases).map(|(a, b)| a + b).collect();
                Ok(crate::nn::argmax(&s) as u8)
            })
            .collect()
    }

    fn param_blocks(&self) -> Vec<(String, usize)> {
        self.circuits
            .iter()
            .enumerate()
            .map(|(j, c)| (format!("circuit{j}.thetas"), c.n_params()))
            .chain(std::iter::once(("biases".to_string(), self.biases.len())))
            .collect()
    }

    /// Container layout: dims `[n_classes, n_qubits, n_layers, margin bits]`,
    /// one theta block per circuit, then the bias block.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut blocks: Vec<Vec<f64>> = self.circuits.iter().map(|c| c.thetas().to_vec()).collect();
        blocks.push(self.biases.clone());
        Checkpoint {
            kind: CLASSIFIER_KIND.into(),
            dims: vec![
                self.n_classes() as u64,
                self.n_qubits() as u64,
                self.n_layers() as u64,
                self.delta.to_bits(),
            ],
            blocks,
            adam: self.adam.as_ref().map(stored_adam),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint, path: &std::path::Path) -> Result<Self> {
        ck.expect_kind(path, CLASSIFIER_KIND)?;
        let bad = || Error::format(path, 0, "quantum-classifier layout mismatch");
        let [nc, nq, nl, delta_bits] = ck.dims[..] else {
            return Err(bad());
        };
        let nc = nc as usize;
        if ck.blocks.len() != nc + 1 {
            return Err(bad());
        }
        let circuits = ck.blocks[..nc]
            .iter()
            .map(|b| AnsatzSpec::new(nq as usize, nl as usize, b.clone()))
            .collect::<Result<Vec<_>>>()?;
        let mut model = Self::from_parts(circuits, ck.blocks[nc].clone(), f64::from_bits(delta_bits))?;
        if let Some(a) = &ck.adam {
            model.adam = Some(restore_adam(&model.param_blocks(), a)?);
        }
        Ok(model)
    }

    /// Margin loss over one batch and its gradient, rows reduced in order.
    fn batch_gradient(&self, prepared: &[PreparedAnsatz], x: ArrayView2<f64>, labels: &[u8]) -> Result<(f64, Vec<f64>)> {
        let per_circuit = self.circuits[0].n_params();
        let nc = self.n_classes();
        let rows: Vec<usize> = (0..x.nrows()).collect();
        let per_sample = rows
            .par_iter()
            .map(|&r| -> Result<(f64, Vec<f64>)> {
                let feats = x.row(r).to_vec();
                let (z, mut states) = self.raw_scores(prepared, &feats)?;
                let s: Vec<f64> = z.iter().zip(&self.biases).map(|(a, b)| a + b).collect();
                let y = usize::from(labels[r]);
                let (loss, ds) = hinge_terms(&s, y, self.delta);
                let mut grad = vec![0.0; nc * per_circuit + nc];
                let mut scratch = vec![0.0; states[0].len()];
                for (j, state) in states.iter_mut().enumerate() {
                    if ds[j] == 0.0 {
                        continue;
                    }
                    let half = state.len() / 2;
                    let mut adjoint: Vec<f64> = state
                        .iter()
                        .enumerate()
                        .map(|(i, a)| if i < half { 2.0 * ds[j] * a } else { -2.0 * ds[j] * a })
                        .collect();
                    let g = &mut grad[j * per_circuit..(j + 1) * per_circuit];
                    prepared[j].backprop(state, &mut adjoint, &mut scratch, g);
                    grad[nc * per_circuit + j] = ds[j];
                }
                Ok((loss, grad))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = x.nrows() as f64;
        let mut total = vec![0.0; nc * per_circuit + nc];
        let mut loss = 0.0;
        for (l, g) in per_sample {
            loss += l;
            total.iter_mut().zip(&g).for_each(|(t, v)| *t += v);
        }
        total.iter_mut().for_each(|v| *v /= n);
        Ok((loss / n, total))
    }

    fn apply_adam(&mut self, cfg: &AdamConfig, grad: &[f64]) -> Result<()> {
        if self.adam.is_none() {
            self.adam = Some(AdamState::new(&self.param_blocks()));
        }
        let per = self.circuits[0].n_params();
        let nc = self.n_classes();
        let grads: Vec<&[f64]> = (0..nc)
            .map(|j| &grad[j * per..(j + 1) * per])
            .chain(std::iter::once(&grad[nc * per..]))
            .collect();
        let adam = self.adam.as_mut().unwrap();
        let mut params: Vec<&mut [f64]> = self.circuits.iter_mut().map(AnsatzSpec::thetas_mut).collect();
        params.push(&mut self.biases);
        adam.step(cfg, &mut params, &grads)
    }
}

/// Per-sample hinge terms `max(0, s_j − s_y + Δ)` and ∂/∂s.
fn hinge_terms(scores: &[f64], y: usize, delta: f64) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut ds = vec![0.0; scores.len()];
    for j in 0..scores.len() {
        if j == y {
            continue;
        }
        let m = scores[j] - scores[y] + delta;
        if m > 0.0 {
            loss += m;
            ds[j] += 1.0;
            ds[y] -= 1.0;
        }
    }
    (loss, ds)
}

/// Batch-mean one-vs-all margin loss.
pub fn margin_loss(scores: ArrayView2<f64>, labels: &[u8], delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Argument(format!("margin {delta} must be positive")));
    }
    if scores.nrows() != labels.len() || labels.is_empty() {
        return Err(Error::Dimension(format!(
            "{} score rows for {} labels",
            scores.nrows(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (row, &y) in scores.rows().into_iter().zip(labels) {
        let y = usize::from(y);
        if y >= row.len() {
            return Err(Error::Argument(format!("label {y} out of range for {} classes", row.len())));
        }
        total += hinge_terms(&row.to_vec(), y, delta).0;
    }
    Ok(total / labels.len() as f64)
}

fn stored_adam(a: &AdamState) -> StoredAdam {
    StoredAdam {
        step: a.step,
        first: a.first.clone(),
        second: a.second.clone(),
    }
}

fn restore_adam(blocks: &[(String, usize)], a: &StoredAdam) -> Result<AdamState> {
    AdamState::from_parts(
        blocks.iter().map(|(s, _)| s.clone()).collect(),
        a.step,
        a.first.clone(),
        a.second.clone(),
    )
}

fn check_width(data: &MeasurementDataset, want: usize) -> Result<()> {
    if data.width() != want {
        return Err(Error::Dimension(format!(
            "dataset has {} features, model takes {want}",
            data.width()
        )));
    }
    if data.is_empty() {
        return Err(Error::Argument("empty training set".into()));
    }
    Ok(())
}

/// Joint Adam minimization of the margin loss over all circuits and biases.
///
/// Validation metric: accuracy.
pub fn train_quantum_classifier(
    model: &mut QuantumClassifier,
    data: &MeasurementDataset,
    val: Option<&MeasurementDataset>,
    config: &TrainConfig,
) -> Result<History> {
    config.validate()?;
    check_width(data, 1 << model.n_qubits())?;
    let mut shuffler = Shuffler::new(config.seed, data.len());
    let mut history = History::default();
    for epoch in 1..=config.epochs {
        let order = shuffler.next_epoch().to_vec();
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let x = data.features.select(Axis(0), batch);
            let labels: Vec<u8> = batch.iter().map(|&i| data.labels[i]).collect();
            let prepared = model.prepare();
            let (loss, grad) = model.batch_gradient(&prepared, x.view(), &labels)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("epoch {epoch} batch {b}: loss became {loss}")));
            }
            total += loss * batch.len() as f64;
            model.apply_adam(&config.adam, &grad)?;
        }
        let val_metric = val
            .map(|v| crate::metrics::accuracy(&model.predict_batch(v.features.view())?, &v.labels))
            .transpose()?;
        history.records.push(EpochRecord {
            epoch,
            train_loss: total / data.len() as f64,
            val_metric,
        });
    }
    Ok(history)
}

/// One 10-qubit circuit whose 1024 basis-state probabilities are the image.
///
/// Probability index `p` is pixel `p` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumReconstructor {
    spec: AnsatzSpec,
    adam: Option<AdamState>,
}

impl QuantumReconstructor {
    pub fn new(n_layers: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            spec: AnsatzSpec::random(RECONSTRUCTOR_QUBITS, n_layers, &mut rng)?,
            adam: None,
        })
    }

    pub fn from_spec(spec: AnsatzSpec) -> Self {
        Self { spec, adam: None }
    }

    pub fn spec(&self) -> &AnsatzSpec {
        &self.spec
    }

    pub fn parameter_count(&self) -> usize {
        self.spec.n_params()
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        let prepared = PreparedAnsatz::new(&self.spec);
        self.forward_prepared(&prepared, features)
    }

    fn forward_prepared(&self, prepared: &PreparedAnsatz, features: &[f64]) -> Result<Vec<f64>> {
        let mut state = embed_real(features, self.spec.n_qubits())?;
        let mut scratch = vec![0.0; state.len()];
        prepared.forward(&mut state, &mut scratch);
        Ok(state.iter().map(|a| a * a).collect())
    }

    /// Probability images for every row (`N × 2^n`).
    pub fn forward_batch(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        let prepared = PreparedAnsatz::new(&self.spec);
        let rows: Vec<Vec<f64>> = features.rows().into_iter().map(|r| r.to_vec()).collect();
        let out = rows
            .par_iter()
            .map(|x| self.forward_prepared(&prepared, x))
            .collect::<Result<Vec<_>>>()?;
        let dim = prepared.dim();
        Array2::from_shape_vec((out.len(), dim), out.concat()).map_err(|e| Error::Dimension(e.to_string()))
    }

    /// MSE against unit-sum targets and its gradient, rows reduced in order.
    fn batch_gradient(&self, prepared: &PreparedAnsatz, x: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<(f64, Vec<f64>)> {
        let n = x.nrows() as f64;
        let m = targets.ncols() as f64;
        let rows: Vec<usize> = (0..x.nrows()).collect();
        let per_sample = rows
            .par_iter()
            .map(|&r| -> Result<(f64, Vec<f64>)> {
                let mut state = embed_real(&x.row(r).to_vec(), self.spec.n_qubits())?;
                let mut scratch = vec![0.0; state.len()];
                prepared.forward(&mut state, &mut scratch);
                let t = targets.row(r);
                let mut loss = 0.0;
                let mut adjoint = Vec::with_capacity(state.len());
                for (a, &ti) in state.iter().zip(t.iter()) {
                    let d = a * a - ti;
                    loss += d * d;
                    // ∂/∂a of (a² − t)² / (N M)
                    adjoint.push(4.0 * d * a / (n * m));
                }
                let mut grad = vec![0.0; prepared.n_params()];
                prepared.backprop(&mut state, &mut adjoint, &mut scratch, &mut grad);
                Ok((loss, grad))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = vec![0.0; prepared.n_params()];
        let mut loss = 0.0;
        for (l, g) in per_sample {
            loss += l;
            total.iter_mut().zip(&g).for_each(|(t, v)| *t += v);
        }
        Ok((loss / (n * m), total))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: RECONSTRUCTOR_KIND.into(),
            dims: vec![self.spec.n_qubits() as u64, self.spec.n_layers() as u64],
            blocks: vec![self.spec.thetas().to_vec()],
            adam: self.adam.as_ref().map(stored_adam),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint, path: &std::path::Path) -> Result<Self> {
        ck.expect_kind(path, RECONSTRUCTOR_KIND)?;
        let ([nq, nl], [thetas]) = (&ck.dims[..], &ck.blocks[..]) else {
            return Err(Error::format(path, 0, "quantum-reconstructor layout mismatch"));
        };
        let spec = AnsatzSpec::new(*nq as usize, *nl as usize, thetas.clone())?;
        let mut model = Self::from_spec(spec);
        if let Some(a) = &ck.adam {
            model.adam = Some(restore_adam(&[("thetas".into(), model.spec.n_params())], a)?);
        }
        Ok(model)
    }
}

/// Divide each target row by its pixel sum; returns the sums.
pub fn normalize_targets(targets: &Array2<f64>) -> Result<(Array2<f64>, Vec<f64>)> {
    let sums: Vec<f64> = targets.rows().into_iter().map(|r| r.sum()).collect();
    if let Some(i) = sums.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::Argument(format!("target row {i} has no positive mass")));
    }
    let mut out = targets.clone();
    for (mut row, s) in out.rows_mut().into_iter().zip(&sums) {
        row /= *s;
    }
    Ok((out, sums))
}

/// Probabilities rescaled by each target's pixel sum, clamped to `[0, 1]`.
pub fn rescale_to_pixels(probs: &Array2<f64>, sums: &[f64]) -> Array2<f64> {
    let mut out = probs.clone();
    for (mut row, s) in out.rows_mut().into_iter().zip(sums) {
        row.mapv_inplace(|p| (p * s).clamp(0.0, 1.0));
    }
    out
}

/// Adam on the MSE between output probabilities and unit-sum targets.
///
/// Validation metric: pixel-space MSE after rescaling each output by its
/// target's pixel sum.
pub fn train_quantum_reconstructor(
    model: &mut QuantumReconstructor,
    data: &MeasurementDataset,
    val: Option<&MeasurementDataset>,
    config: &TrainConfig,
) -> Result<History> {
    config.validate()?;
    check_width(data, data.width())?;
    let targets = data
        .targets
        .as_ref()
        .ok_or_else(|| Error::Argument("reconstruction training needs targets".into()))?;
    let dim = 1usize << model.spec.n_qubits();
    if targets.ncols() != dim {
        return Err(Error::Dimension(format!(
            "targets have {} pixels, circuit yields {dim}",
            targets.ncols()
        )));
    }
    let (unit, _) = normalize_targets(targets)?;
    let mut shuffler = Shuffler::new(config.seed, data.len());
    let mut history = History::default();
    for epoch in 1..=config.epochs {
        let order = shuffler.next_epoch().to_vec();
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let x = data.features.select(Axis(0), batch);
            let t = unit.select(Axis(0), batch);
            let prepared = PreparedAnsatz::new(&model.spec);
            let (loss, grad) = model.batch_gradient(&prepared, x.view(), t.view())?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("epoch {epoch} batch {b}: loss became {loss}")));
            }
            total += loss * batch.len() as f64;
            if model.adam.is_none() {
                model.adam = Some(AdamState::new(&[("thetas".into(), model.spec.n_params())]));
            }
            let adam = model.adam.as_mut().unwrap();
            adam.step(&config.adam, &mut [model.spec.thetas_mut()], &[&grad])?;
        }
        let val_metric = val
            .map(|v| -> Result<f64> {
                let vt = v
                    .targets
                    .as_ref()
                    .ok_or_else(|| Error::Argument("validation set has no targets".into()))?;
                let (_, sums) = normalize_targets(vt)?;
                let probs = model.forward_batch(v.features.view())?;
                crate::nn::mse_loss(rescale_to_pixels(&probs, &sums).view(), vt.view())
            })
            .transpose()?;
        history.records.push(EpochRecord {
            epoch,
            train_loss: total / data.len() as f64,
            val_metric,
        });
    }
    Ok(history)
}
