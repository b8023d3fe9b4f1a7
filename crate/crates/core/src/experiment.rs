//! End-to-end pieces shared by the command line and the acceptance suite:
//! mask selection over a split, a uniform wrapper over the four model kinds,
//! evaluation and measurement-count sweeps.

use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::dataset::{build_measurement_dataset, DatasetSplit, MeasurementDataset};
use crate::error::{Error, Result};
use crate::hadamard::{column_variances, mask_from_variances, measure_full, HadamardOrder, SelectionMask};
use crate::history::{History, TrainConfig};
use crate::metrics::{accuracy, dataset_ssim};
use crate::nn::{self, Activation, DenseNetwork, LogBase, LossKind};
use crate::optim::AdamConfig;
use crate::qml::{self, QuantumClassifier, QuantumReconstructor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    ClassicalClassifier,
    ClassicalReconstructor,
    QuantumClassifier,
    QuantumReconstructor,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::ClassicalClassifier,
        ModelKind::ClassicalReconstructor,
        ModelKind::QuantumClassifier,
        ModelKind::QuantumReconstructor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::ClassicalClassifier => "classical-classifier",
            ModelKind::ClassicalReconstructor => "classical-reconstructor",
            ModelKind::QuantumClassifier => "quantum-classifier",
            ModelKind::QuantumReconstructor => "quantum-reconstructor",
        }
    }

    pub fn is_reconstructor(self) -> bool {
        matches!(self, ModelKind::ClassicalReconstructor | ModelKind::QuantumReconstructor)
    }

    pub fn is_quantum(self) -> bool {
        matches!(self, ModelKind::QuantumClassifier | ModelKind::QuantumReconstructor)
    }

    /// 6 epochs for classifiers, 10 for reconstructors.
    pub fn default_epochs(self) -> usize {
        if self.is_reconstructor() {
            10
        } else {
            6
        }
    }

    pub fn default_learning_rate(self) -> f64 {
        if self.is_quantum() {
            qml::DEFAULT_QUANTUM_LR
        } else {
            AdamConfig::default().learning_rate
        }
    }

    pub fn default_config(self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.default_epochs(),
            batch_size: 64,
            adam: AdamConfig::with_lr(self.default_learning_rate()),
            seed,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.as_str()).collect();
                Error::Argument(format!("unknown model kind {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Full 1024-coefficient measurements of every object, one row each.
pub fn full_measurements(split: &DatasetSplit) -> Result<Array2<f64>> {
    let rows = split
        .items
        .par_iter()
        .map(|it| Ok(measure_full(&it.image)?.values().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let width = rows.first().map_or(0, Vec::len);
    Array2::from_shape_vec((rows.len(), width), rows.concat()).map_err(|e| Error::Dimension(e.to_string()))
}

/// Top-`m` variance mask over a split's full measurements.
pub fn variance_mask(split: &DatasetSplit, m: usize) -> Result<SelectionMask> {
    let full = full_measurements(split)?;
    mask_from_variances_of(&full, m)
}

/// Top-`m` variance mask over precomputed full measurements.
pub fn mask_from_variances_of(full: &Array2<f64>, m: usize) -> Result<SelectionMask> {
    let order = HadamardOrder::from_len(full.ncols())?;
    let variances = column_variances(full.rows().into_iter().map(|r| r.to_slice().unwrap()), full.ncols())?;
    mask_from_variances(order, &variances, m)
}

/// Every coefficient of every object, with pixel targets if asked for.
pub fn full_dataset(split: &DatasetSplit, with_targets: bool) -> Result<MeasurementDataset> {
    let order = HadamardOrder::from_side(crate::dataset::OBJECT_SIDE)?;
    build_measurement_dataset(split, &SelectionMask::full(order), with_targets)
}

/// Top-`m` variance mask over the rows of a full-measurement dataset.
pub fn mask_for(full: &MeasurementDataset, m: usize) -> Result<SelectionMask> {
    require_full(full)?;
    mask_from_variances_of(&full.features, m)
}

fn require_full(ds: &MeasurementDataset) -> Result<()> {
    if ds.mask.len() != ds.mask.order().n_total() {
        return Err(Error::Dimension(format!(
            "expected all {} coefficients, dataset has {}",
            ds.mask.order().n_total(),
            ds.mask.len()
        )));
    }
    Ok(())
}

/// Keep only the masked columns of a full-measurement dataset.
pub fn restrict(full: &MeasurementDataset, mask: &SelectionMask) -> Result<MeasurementDataset> {
    require_full(full)?;
    if mask.order() != full.mask.order() {
        return Err(Error::Dimension(format!(
            "mask for length {} applied to length {}",
            mask.order().n_total(),
            full.mask.order().n_total()
        )));
    }
    Ok(MeasurementDataset {
        features: full.features.select(ndarray::Axis(1), mask.indices()),
        labels: full.labels.clone(),
        targets: full.targets.clone(),
        mask: mask.clone(),
    })
}

/// Rows of the zeros followed by rows of the ones, each in dataset order;
/// `per_class` keeps only the first that many of each.
pub fn two_class_rows(ds: &MeasurementDataset, per_class: Option<usize>) -> Result<MeasurementDataset> {
    let pick = |label: u8| -> Vec<usize> {
        let it = (0..ds.len()).filter(|&i| ds.labels[i] == label);
        match per_class {
            Some(n) => it.take(n).collect(),
            None => it.collect(),
        }
    };
    let (zeros, ones) = (pick(0), pick(1));
    if let Some(n) = per_class {
        if zeros.len() < n || ones.len() < n {
            return Err(Error::Argument(format!(
                "need {n} zeros and {n} ones, dataset has {} and {}",
                zeros.len(),
                ones.len()
            )));
        }
    }
    Ok(ds.select(&[zeros, ones].concat()))
}

/// The first `n` rows (all of them if there are fewer).
pub fn limit_rows(ds: &MeasurementDataset, n: usize) -> MeasurementDataset {
    ds.select(&(0..n.min(ds.len())).collect::<Vec<_>>())
}

/// Metrics for one model on one dataset; fields not meaningful for the
/// model kind are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Evaluation {
    pub accuracy: Option<f64>,
    pub mse: Option<f64>,
    pub ssim: Option<f64>,
}

/// Classical networks see orthonormal coefficients: raw measurements
/// divided by `√n_total`. The circuit models normalize their input anyway.
pub fn classical_inputs(data: &MeasurementDataset) -> MeasurementDataset {
    let scale = 1.0 / (data.mask.order().n_total() as f64).sqrt();
    MeasurementDataset {
        features: data.features.mapv(|v| v * scale),
        ..data.clone()
    }
}

/// Any trained model, with one interface for training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Classical(DenseNetwork),
    QuantumClassifier(QuantumClassifier),
    QuantumReconstructor(QuantumReconstructor),
}

impl Model {
    /// Fresh model for `width` input features. `layers` only applies to the
    /// circuit models.
    pub fn build(kind: ModelKind, width: usize, layers: usize, seed: u64) -> Result<Self> {
        let need_width = |w: usize| {
            if width == w {
                Ok(())
            } else {
                Err(Error::Dimension(format!("{kind} takes {w} features, got {width}")))
            }
        };
        Ok(match kind {
            ModelKind::ClassicalClassifier => Model::Classical(nn::build_classifier_with_input(width, seed)?),
            ModelKind::ClassicalReconstructor => Model::Classical(nn::build_reconstructor_with_input(width, seed)?),
            ModelKind::QuantumClassifier => {
                need_width(1 << qml::CLASSIFIER_QUBITS)?;
                Model::QuantumClassifier(QuantumClassifier::new(layers, seed)?)
            }
            ModelKind::QuantumReconstructor => {
                if !width.is_power_of_two() || width > 1 << qml::RECONSTRUCTOR_QUBITS {
                    return Err(Error::Dimension(format!(
                        "{kind} takes a power-of-two feature count up to 1024, got {width}"
                    )));
                }
                Model::QuantumReconstructor(QuantumReconstructor::new(layers, seed)?)
            }
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Classical(net) => match net.layers().last().map(|l| l.activation) {
                Some(Activation::Softmax) => ModelKind::ClassicalClassifier,
                _ => ModelKind::ClassicalReconstructor,
            },
            Model::QuantumClassifier(_) => ModelKind::QuantumClassifier,
            Model::QuantumReconstructor(_) => ModelKind::QuantumReconstructor,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Model::Classical(n) => n.parameter_count(),
            Model::QuantumClassifier(m) => m.parameter_count(),
            Model::QuantumReconstructor(m) => m.parameter_count(),
        }
    }

    pub fn train(
        &mut self,
        data: &MeasurementDataset,
        val: Option<&MeasurementDataset>,
        config: &TrainConfig,
    ) -> Result<History> {
        let kind = self.kind();
        match self {
            Model::Classical(net) => {
                let loss = if kind == ModelKind::ClassicalClassifier {
                    LossKind::CrossEntropy(LogBase::Two)
                } else {
                    LossKind::Mse
                };
                let val = val.map(classical_inputs);
                nn::train(net, &classical_inputs(data), val.as_ref(), config, loss)
            }
            Model::QuantumClassifier(m) => qml::train_quantum_classifier(m, data, val, config),
            Model::QuantumReconstructor(m) => qml::train_quantum_reconstructor(m, data, val, config),
        }
    }

    /// Class predictions; an argument error for reconstructors.
    pub fn classify(&self, data: &MeasurementDataset) -> Result<Vec<u8>> {
        match self {
            Model::Classical(net) if self.kind() == ModelKind::ClassicalClassifier => {
                nn::predict_class(net, classical_inputs(data).features.view())
            }
            Model::QuantumClassifier(m) => m.predict_batch(data.features.view()),
            _ => Err(Error::Argument(format!("{} does not classify", self.kind()))),
        }
    }

    /// Pixel-space images in `[0, 1]`.
    ///
    /// Circuit outputs are rescaled by each target's pixel sum, so the
    /// dataset must carry targets for the quantum reconstructor.
    pub fn reconstruct(&self, data: &MeasurementDataset) -> Result<Array2<f64>> {
        match self {
            Model::Classical(net) if self.kind() == ModelKind::ClassicalReconstructor => {
                nn::predict_image(net, classical_inputs(data).features.view())
            }
            Model::QuantumReconstructor(m) => {
                let targets = data
                    .targets
                    .as_ref()
                    .ok_or_else(|| Error::Argument("rescaling circuit outputs needs targets".into()))?;
                let (_, sums) = qml::normalize_targets(targets)?;
                Ok(qml::rescale_to_pixels(&m.forward_batch(data.features.view())?, &sums))
            }
            _ => Err(Error::Argument(format!("{} does not reconstruct", self.kind()))),
        }
    }

    pub fn evaluate(&self, data: &MeasurementDataset) -> Result<Evaluation> {
        if !self.kind().is_reconstructor() {
            return Ok(Evaluation {
                accuracy: Some(accuracy(&self.classify(data)?, &data.labels)?),
                ..Evaluation::default()
            });
        }
        let targets = data
            .targets
            .as_ref()
            .ok_or_else(|| Error::Argument("evaluating a reconstructor needs targets".into()))?;
        let images = self.reconstruct(data)?;
        let side = (targets.ncols() as f64).sqrt() as usize;
        let outs: Vec<&[f64]> = images.rows().into_iter().map(|r| r.to_slice().unwrap()).collect();
        let tgts: Vec<&[f64]> = targets.rows().into_iter().map(|r| r.to_slice().unwrap()).collect();
        Ok(Evaluation {
            accuracy: None,
            mse: Some(nn::mse_loss(images.view(), targets.view())?),
            ssim: Some(dataset_ssim(&outs, &tgts, side)?),
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        match self {
            Model::Classical(n) => n.to_checkpoint(),
            Model::QuantumClassifier(m) => m.to_checkpoint(),
            Model::QuantumReconstructor(m) => m.to_checkpoint(),
        }
    }

    /// Dispatches on the checkpoint's kind tag.
    pub fn from_checkpoint(ck: &Checkpoint, path: &Path) -> Result<Self> {
        match ck.kind.as_str() {
            "quantum-classifier" => Ok(Model::QuantumClassifier(QuantumClassifier::from_checkpoint(ck, path)?)),
            "quantum-reconstructor" => Ok(Model::QuantumReconstructor(QuantumReconstructor::from_checkpoint(
                ck, path,
            )?)),
            _ => Ok(Model::Classical(DenseNetwork::from_checkpoint(ck, path)?)),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }
}

/// Sorted, de-duplicated sizes; each must lie in `1..=n_total`.
pub fn normalize_sizes(sizes: &[usize], n_total: usize) -> Result<Vec<usize>> {
    let mut out = sizes.to_vec();
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        return Err(Error::Argument("no measurement sizes given".into()));
    }
    if let Some(&bad) = out.iter().find(|&&m| m == 0 || m > n_total) {
        return Err(Error::Argument(format!("size {bad} must be in 1..={n_total}")));
    }
    Ok(out)
}

/// `{1, 2, 4, …, n_total}`.
pub fn default_sweep_sizes(n_total: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |m| (*m < n_total).then_some(m * 2)).collect()
}

/// One point of a measurement-count sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub m: usize,
    pub value: f64,
}

/// Test metric of a classical model trained on the top-`m` coefficients,
/// for every `m` in `sizes`. Both datasets hold full measurements; the
/// ranking is computed once on `train`.
///
/// Accuracy for the classifier, MSE for the reconstructor (whose datasets
/// must carry targets).
pub fn sweep(
    kind: ModelKind,
    train: &MeasurementDataset,
    test: &MeasurementDataset,
    sizes: &[usize],
    config: &TrainConfig,
    mut on_point: impl FnMut(SweepPoint),
) -> Result<Vec<SweepPoint>> {
    if kind.is_quantum() {
        return Err(Error::Argument(format!("sweeps take a classical model, got {kind}")));
    }
    require_full(train)?;
    let sizes = normalize_sizes(sizes, train.width())?;
    let mut points = Vec::with_capacity(sizes.len());
    for m in sizes {
        let mask = mask_for(train, m)?;
        let tr = restrict(train, &mask)?;
        let te = restrict(test, &mask)?;
        let mut model = Model::build(kind, m, 0, config.seed)?;
        model.train(&tr, None, config)?;
        let eval = model.evaluate(&te)?;
        let value = if kind.is_reconstructor() { eval.mse } else { eval.accuracy }.expect("metric for kind");
        let p = SweepPoint { m, value };
        on_point(p);
        points.push(p);
    }
    Ok(points)
}
