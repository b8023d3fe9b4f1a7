use std::fmt::Write as _;

/// Hyper-parameters for a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: crate::optim::AdamConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.epochs == 0 {
            return Err(crate::Error::Argument("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(crate::Error::Argument("batch size must be >= 1".into()));
        }
        self.adam.validate()
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 6,
            batch_size: 64,
            adam: crate::optim::AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy for classifiers, MSE for reconstructors; `None` without validation data.
    pub val_metric: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn last_metric(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.val_metric)
    }

    /// `epoch,train_loss,val_metric` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_metric\n");
        for r in &self.records {
            let val = r.val_metric.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", r.epoch, r.train_loss, val);
        }
        out
    }
}

/// Deterministic per-epoch shuffles drawn from one seeded stream.
pub(crate) struct Shuffler {
    rng: rand_chacha::ChaCha8Rng,
    order: Vec<usize>,
}

impl Shuffler {
    pub fn new(seed: u64, n: usize) -> Self {
        use rand::SeedableRng;
        Self {
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
            order: (0..n).collect(),
        }
    }

    pub fn next_epoch(&mut self) -> &[usize] {
        use rand::seq::SliceRandom;
        self.order.shuffle(&mut self.rng);
        &self.order
    }
}
