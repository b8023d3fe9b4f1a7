use std::io::Write;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use spixel::dataset::SplitName;
use spixel::experiment::{default_sweep_sizes, normalize_sizes, sweep, ModelKind};

use super::out_path;
use crate::data::{attach_targets, load_full, subset_rows, Subset, DEFAULT_PER_CLASS};
use crate::manifest::Record;
use crate::Global;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMetric {
    /// Classifier accuracy and reconstructor MSE.
    Both,
    Accuracy,
    Mse,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Comma-separated coefficient counts; powers of two up to 1024 when omitted.
    #[arg(long, env = "SPIXEL_SIZES", value_delimiter = ',')]
    pub sizes: Vec<usize>,

    /// Which curves to produce.
    #[arg(long, env = "SPIXEL_METRIC", value_enum, default_value_t = SweepMetric::Both)]
    pub metric: SweepMetric,

    /// Epochs for every classifier in the sweep.
    #[arg(long, env = "SPIXEL_CLASSIFIER_EPOCHS", default_value_t = 6)]
    pub classifier_epochs: usize,

    /// Epochs for every reconstructor in the sweep.
    #[arg(long, env = "SPIXEL_RECONSTRUCTOR_EPOCHS", default_value_t = 10)]
    pub reconstructor_epochs: usize,

    /// Images per class in the reconstructors' training subset.
    #[arg(long, env = "SPIXEL_PER_CLASS", default_value_t = DEFAULT_PER_CLASS)]
    pub per_class: usize,

    /// Keep only the first N training rows.
    #[arg(long, env = "SPIXEL_LIMIT")]
    pub limit: Option<usize>,
}

fn curve(
    global: &Global,
    args: &SweepArgs,
    kind: ModelKind,
    sizes: &[usize],
    record: &mut Record,
) -> anyhow::Result<()> {
    let (subset, epochs, column) = if kind.is_reconstructor() {
        (Subset::Reduced, args.reconstructor_epochs, "mse")
    } else {
        (Subset::Full, args.classifier_epochs, "accuracy")
    };
    let mut cfg = kind.default_config(global.seed);
    cfg.epochs = epochs;
    cfg.validate()?;

    let mut train = subset_rows(load_full(global, SplitName::Train)?, SplitName::Train, subset, args.per_class, args.limit)?;
    let mut test = subset_rows(load_full(global, SplitName::Test)?, SplitName::Test, subset, args.per_class, None)?;
    if kind.is_reconstructor() {
        attach_targets(&mut train);
        attach_targets(&mut test);
    }

    let path = out_path(global, &format!("sweep-{column}.csv"));
    let file = std::fs::File::create(&path).map_err(|e| spixel::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "m,{column}")?;
    out.flush()?;
    let mut io_err = None;
    sweep(kind, &train, &test, sizes, &cfg, |p| {
        println!("{kind} m={:<5} {column} {:.6}", p.m, p.value);
        if let Err(e) = writeln!(out, "{},{}", p.m, p.value).and_then(|()| out.flush()) {
            io_err.get_or_insert(e);
        }
        record.metric(&format!("{column}_m{}", p.m), p.value);
    })?;
    if let Some(e) = io_err {
        return Err(spixel::Error::Io { path, source: e }.into());
    }
    record.output(column, &path);
    Ok(())
}

pub fn run(global: &Global, args: &SweepArgs, record: &mut Record) -> anyhow::Result<()> {
    let sizes = if args.sizes.is_empty() {
        default_sweep_sizes(1024)
    } else {
        normalize_sizes(&args.sizes, 1024)?
    };
    record.resolve("sizes", sizes.clone());
    if args.metric != SweepMetric::Mse {
        curve(global, args, ModelKind::ClassicalClassifier, &sizes, record)?;
    }
    if args.metric != SweepMetric::Accuracy {
        curve(global, args, ModelKind::ClassicalReconstructor, &sizes, record)?;
    }
    Ok(())
}
