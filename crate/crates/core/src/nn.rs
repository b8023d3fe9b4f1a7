//! Fully connected ReLU networks trained with Adam.

use ndarray::{linalg::general_mat_mul, s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{Checkpoint, StoredAdam};
use crate::dataset::MeasurementDataset;
use crate::error::{Error, Result};
use crate::history::{EpochRecord, History, Shuffler, TrainConfig};
use crate::optim::AdamState;

pub const CLASSIFIER_DIMS: [usize; 3] = [64, 128, 10];
pub const RECONSTRUCTOR_DIMS: [usize; 6] = [64, 1000, 2000, 4000, 2000, 1024];

const CHECKPOINT_KIND: &str = "classical";
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    Softmax,
}

impl Activation {
    fn code(self) -> u64 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
            Activation::Softmax => 2,
        }
    }

    fn from_code(c: u64) -> Option<Self> {
        match c {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Identity),
            2 => Some(Activation::Softmax),
            _ => None,
        }
    }

    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Identity => {}
            Activation::Softmax => {
                for mut row in z.rows_mut() {
                    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|v| v / sum);
                }
            }
        }
    }
}

/// Logarithm used by the cross-entropy loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Two,
    Natural,
}

impl LogBase {
    fn ln_scale(self) -> f64 {
        match self {
            LogBase::Two => std::f64::consts::LN_2,
            LogBase::Natural => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy(LogBase),
    Mse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        z += &self.biases;
        self.activation.apply(&mut z);
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
    adam: Option<AdamState>,
}

/// `Σ n_out (n_in + 1)` over consecutive layer widths.
pub fn parameter_count_for(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::Argument(format!("invalid layer widths {dims:?}")));
    }
    Ok(())
}

impl DenseNetwork {
    /// Glorot-uniform weights, zero biases.
    pub fn new(dims: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<Self> {
        check_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights =
                    Array2::from_shape_simple_fn((fan_out, fan_in), || rng.gen_range(-limit..limit));
                DenseLayer {
                    weights,
                    biases: Array1::zeros(fan_out),
                    activation: if k + 1 == n { output } else { hidden },
                }
            })
            .collect();
        Ok(Self { layers, adam: None })
    }

    /// All-zero parameters.
    pub fn zeros(dims: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        check_dims(dims)?;
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| DenseLayer {
                weights: Array2::zeros((w[1], w[0])),
                biases: Array1::zeros(w[1]),
                activation: if k + 1 == n { output } else { hidden },
            })
            .collect();
        Ok(Self { layers, adam: None })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Argument("network needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Dimension(format!(
                    "layer {k} outputs {} but layer {} takes {}",
                    pair[0].output_dim(),
                    k + 1,
                    pair[1].input_dim()
                )));
            }
        }
        for (k, l) in layers.iter().enumerate() {
            if l.biases.len() != l.output_dim() {
                return Err(Error::Dimension(format!("layer {k} bias length mismatch")));
            }
            let finite = l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Numeric(format!("layer {k} has non-finite parameters")));
            }
        }
        Ok(Self { layers, adam: None })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(DenseLayer::output_dim))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn adam_state(&self) -> Option<&AdamState> {
        self.adam.as_ref()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network takes {} features, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut out = Array2::zeros((x.nrows(), self.output_dim()));
        for start in (0..x.nrows()).step_by(EVAL_CHUNK) {
            let end = (start + EVAL_CHUNK).min(x.nrows());
            let mut a = x.slice(s![start..end, ..]).to_owned();
            for l in &self.layers {
                a = l.forward(&a.view());
            }
            out.slice_mut(s![start..end, ..]).assign(&a);
        }
        Ok(out)
    }

    /// Activations of every layer, input first.
    fn forward_cached(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for l in &self.layers {
            let next = l.forward(&acts.last().unwrap().view());
            acts.push(next);
        }
        acts
    }

    /// Batch loss and its gradient with respect to every parameter block.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        targets: Targets<'_>,
        loss: LossKind,
    ) -> Result<(f64, Vec<LayerGradient>)> {
        let mut grads = self.zero_gradients();
        let value = self.accumulate_gradients(x, targets, loss, &mut grads)?;
        Ok((value, grads))
    }

    fn zero_gradients(&self) -> Vec<LayerGradient> {
        self.layers
            .iter()
            .map(|l| LayerGradient {
                weights: Array2::zeros(l.weights.raw_dim()),
                biases: Array1::zeros(l.biases.len()),
            })
            .collect()
    }

    fn accumulate_gradients(
        &self,
        x: ArrayView2<f64>,
        targets: Targets<'_>,
        loss: LossKind,
        grads: &mut [LayerGradient],
    ) -> Result<f64> {
        self.check_input(&x)?;
        let acts = self.forward_cached(x);
        let out = acts.last().unwrap();
        let n = x.nrows() as f64;
        let last = self.layers.last().unwrap().activation;
        let (value, mut delta) = match (loss, targets) {
            (LossKind::CrossEntropy(base), Targets::Labels(labels)) => {
                if last != Activation::Softmax {
                    return Err(Error::Argument("cross-entropy needs a softmax output".into()));
                }
                let value = cross_entropy_unchecked(out.view(), labels, base)?;
                let mut d = out.clone();
                for (mut row, &y) in d.rows_mut().into_iter().zip(labels) {
                    row[usize::from(y)] -= 1.0;
                }
                d /= n * base.ln_scale();
                (value, d)
            }
            (LossKind::Mse, Targets::Values(y)) => {
                if last != Activation::Identity {
                    return Err(Error::Argument("mse training needs a linear output".into()));
                }
                let value = mse_loss(out.view(), y)?;
                let scale = 2.0 / (n * out.ncols() as f64);
                let d = (out - &y) * scale;
                (value, d)
            }
            _ => return Err(Error::Argument("loss kind does not match targets".into())),
        };
        for k in (0..self.layers.len()).rev() {
            let prev = &acts[k];
            general_mat_mul(1.0, &delta.t(), prev, 0.0, &mut grads[k].weights);
            grads[k].biases = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&self.layers[k].weights);
                match self.layers[k - 1].activation {
                    Activation::Relu => {
                        ndarray::Zip::from(&mut back).and(prev).for_each(|d, &a| {
                            if a <= 0.0 {
                                *d = 0.0;
                            }
                        })
                    }
                    Activation::Identity => {}
                    Activation::Softmax => {
                        return Err(Error::Argument("softmax is only supported on the output".into()))
                    }
                }
                delta = back;
            }
        }
        Ok(value)
    }

    fn param_blocks(&self) -> Vec<(String, usize)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(k, l)| {
                [
                    (format!("layer{k}.weights"), l.weights.len()),
                    (format!("layer{k}.biases"), l.biases.len()),
                ]
            })
            .collect()
    }

    fn apply_adam(&mut self, cfg: &crate::optim::AdamConfig, grads: &[LayerGradient]) -> Result<()> {
        if self.adam.is_none() {
            self.adam = Some(AdamState::new(&self.param_blocks()));
        }
        let adam = self.adam.as_mut().unwrap();
        let mut params: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            params.push(l.weights.as_slice_mut().expect("standard layout"));
            params.push(l.biases.as_slice_mut().expect("standard layout"));
        }
        let g: Vec<&[f64]> = grads
            .iter()
            .flat_map(|g| {
                [
                    g.weights.as_slice().expect("standard layout"),
                    g.biases.as_slice().expect("standard layout"),
                ]
            })
            .collect();
        adam.step(cfg, &mut params, &g)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut dims = vec![self.layers.len() as u64, self.input_dim() as u64];
        for l in &self.layers {
            dims.push(l.output_dim() as u64);
            dims.push(l.activation.code());
        }
        let blocks = self
            .layers
            .iter()
            .flat_map(|l| [l.weights.iter().copied().collect(), l.biases.to_vec()])
            .collect();
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            dims,
            blocks,
            adam: self.adam.as_ref().map(|a| StoredAdam {
                step: a.step,
                first: a.first.clone(),
                second: a.second.clone(),
            }),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint, path: &std::path::Path) -> Result<Self> {
        ck.expect_kind(path, CHECKPOINT_KIND)?;
        let bad = |m: &str| Error::format(path, 0, m.to_string());
        let n = *ck.dims.first().ok_or_else(|| bad("empty dim table"))? as usize;
        if ck.dims.len() != 2 + 2 * n || ck.blocks.len() != 2 * n {
            return Err(bad("dim table does not match block count"));
        }
        let mut fan_in = ck.dims[1] as usize;
        let mut layers = Vec::with_capacity(n);
        for k in 0..n {
            let fan_out = ck.dims[2 + 2 * k] as usize;
            let act = Activation::from_code(ck.dims[3 + 2 * k]).ok_or_else(|| bad("unknown activation"))?;
            let weights = Array2::from_shape_vec((fan_out, fan_in), ck.blocks[2 * k].clone())
                .map_err(|_| bad("weight block has wrong size"))?;
            let biases = Array1::from_vec(ck.blocks[2 * k + 1].clone());
            layers.push(DenseLayer {
                weights,
                biases,
                activation: act,
            });
            fan_in = fan_out;
        }
        let mut net = Self::from_layers(layers)?;
        if let Some(a) = &ck.adam {
            let names = net.param_blocks().into_iter().map(|(s, _)| s).collect();
            net.adam = Some(AdamState::from_parts(
                names,
                a.step,
                a.first.clone(),
                a.second.clone(),
            )?);
        }
        Ok(net)
    }
}

/// Gradient of one dense layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Labels(&'a [u8]),
    Values(ArrayView2<'a, f64>),
}

/// 64 → 128 (ReLU) → 10 (softmax).
pub fn build_classifier(seed: u64) -> DenseNetwork {
    DenseNetwork::new(&CLASSIFIER_DIMS, Activation::Relu, Activation::Softmax, seed)
        .expect("static dims")
}

/// Same architecture with an arbitrary input width, for measurement-count sweeps.
pub fn build_classifier_with_input(inputs: usize, seed: u64) -> Result<DenseNetwork> {
    DenseNetwork::new(&[inputs, 128, 10], Activation::Relu, Activation::Softmax, seed)
}

/// 64 → 1000 → 2000 → 4000 → 2000 (ReLU) → 1024 (linear).
pub fn build_reconstructor(seed: u64) -> DenseNetwork {
    DenseNetwork::new(&RECONSTRUCTOR_DIMS, Activation::Relu, Activation::Identity, seed)
        .expect("static dims")
}

pub fn build_reconstructor_with_input(inputs: usize, seed: u64) -> Result<DenseNetwork> {
    let mut dims = RECONSTRUCTOR_DIMS;
    dims[0] = inputs;
    DenseNetwork::new(&dims, Activation::Relu, Activation::Identity, seed)
}

fn cross_entropy_unchecked(q: ArrayView2<f64>, labels: &[u8], base: LogBase) -> Result<f64> {
    if q.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} prediction rows for {} labels",
            q.nrows(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (row, &y) in q.rows().into_iter().zip(labels) {
        let y = usize::from(y);
        if y >= row.len() {
            return Err(Error::Argument(format!("label {y} out of range for {} classes", row.len())));
        }
        total -= row[y].max(1e-12).ln();
    }
    Ok(total / (labels.len() as f64 * base.ln_scale()))
}

/// Mean negative log-likelihood of the true class, clamped at 1e-12.
pub fn cross_entropy_loss(predicted: ArrayView2<f64>, labels: &[u8], base: LogBase) -> Result<f64> {
    for (i, row) in predicted.rows().into_iter().enumerate() {
        if (row.sum() - 1.0).abs() > 1e-6 {
            return Err(Error::Argument(format!("row {i} of predictions does not sum to 1")));
        }
    }
    cross_entropy_unchecked(predicted, labels, base)
}

pub fn mse_loss(predicted: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<f64> {
    if predicted.dim() != target.dim() {
        return Err(Error::Dimension(format!(
            "prediction {:?} vs target {:?}",
            predicted.dim(),
            target.dim()
        )));
    }
    let n = predicted.len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = predicted
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (b - a) * (b - a))
        .sum();
    Ok(sum / n as f64)
}

/// Argmax per row; the lowest index wins exact ties.
pub fn predict_class(net: &DenseNetwork, features: ArrayView2<f64>) -> Result<Vec<u8>> {
    let out = net.forward(features)?;
    Ok(out.rows().into_iter().map(|r| argmax(r.as_slice().unwrap()) as u8).collect())
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Network output clamped to `[0, 1]`.
pub fn predict_image(net: &DenseNetwork, features: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut out = net.forward(features)?;
    out.mapv_inplace(|v| v.clamp(0.0, 1.0));
    Ok(out)
}

fn validation_metric(net: &DenseNetwork, val: &MeasurementDataset, loss: LossKind) -> Result<f64> {
    match loss {
        LossKind::CrossEntropy(_) => {
            let pred = predict_class(net, val.features.view())?;
            Ok(crate::metrics::accuracy(&pred, &val.labels)?)
        }
        LossKind::Mse => {
            let t = val
                .targets
                .as_ref()
                .ok_or_else(|| Error::Argument("validation set has no targets".into()))?;
            mse_loss(predict_image(net, val.features.view())?.view(), t.view())
        }
    }
}

/// Mini-batch Adam training, reshuffling every epoch from `config.seed`.
pub fn train(
    net: &mut DenseNetwork,
    data: &MeasurementDataset,
    val: Option<&MeasurementDataset>,
    config: &TrainConfig,
    loss: LossKind,
) -> Result<History> {
    config.validate()?;
    if data.width() != net.input_dim() {
        return Err(Error::Dimension(format!(
            "dataset has {} features, network takes {}",
            data.width(),
            net.input_dim()
        )));
    }
    if data.is_empty() {
        return Err(Error::Argument("empty training set".into()));
    }
    if loss == LossKind::Mse && data.targets.is_none() {
        return Err(Error::Argument("reconstruction training needs targets".into()));
    }
    let mut shuffler = Shuffler::new(config.seed, data.len());
    let mut grads = net.zero_gradients();
    let mut history = History::default();
    for epoch in 1..=config.epochs {
        let order = shuffler.next_epoch().to_vec();
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let x = data.features.select(Axis(0), batch);
            let labels: Vec<u8>;
            let tvals: Array2<f64>;
            let targets = match loss {
                LossKind::CrossEntropy(_) => {
                    labels = batch.iter().map(|&i| data.labels[i]).collect();
                    Targets::Labels(&labels)
                }
                LossKind::Mse => {
                    tvals = data.targets.as_ref().unwrap().select(Axis(0), batch);
                    Targets::Values(tvals.view())
                }
            };
            let value = net.accumulate_gradients(x.view(), targets, loss, &mut grads)?;
            if !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "epoch {epoch} batch {b}: loss became {value}"
                )));
            }
            total += value * batch.len() as f64;
            net.apply_adam(&config.adam, &grads)?;
        }
        let val_metric = val.map(|v| validation_metric(net, v, loss)).transpose()?;
        history.records.push(EpochRecord {
            epoch,
            train_loss: total / data.len() as f64,
            val_metric,
        });
    }
    Ok(history)
}
