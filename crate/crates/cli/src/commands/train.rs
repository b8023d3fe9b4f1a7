use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use spixel::dataset::SplitName;
use spixel::experiment::{mask_for, restrict, Model};
use spixel::hadamard::SelectionMask;
use spixel::history::TrainConfig;
use spixel::optim::AdamConfig;

use super::{out_path, write_text, KindArg};
use crate::data::{attach_targets, load_full, subset_rows, Subset, DEFAULT_PER_CLASS};
use crate::manifest::Record;
use crate::Global;

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Which model to train.
    #[arg(long, env = "SPIXEL_MODEL", value_enum)]
    pub model: KindArg,

    /// Ansatz layers; quantum models only.
    #[arg(long, env = "SPIXEL_LAYERS", default_value_t = 6)]
    pub layers: usize,

    /// Passes over the training rows; 6 for classifiers, 10 for reconstructors.
    #[arg(long, env = "SPIXEL_EPOCHS")]
    pub epochs: Option<usize>,

    /// Adam step size; 1e-3 for dense networks, 0.01 for circuits.
    #[arg(long, env = "SPIXEL_LR")]
    pub lr: Option<f64>,

    /// Mini-batch size.
    #[arg(long, env = "SPIXEL_BATCH", default_value_t = 64)]
    pub batch: usize,

    /// Training rows; reconstructors default to the reduced subset.
    #[arg(long, env = "SPIXEL_SUBSET", value_enum)]
    pub subset: Option<Subset>,

    /// Images per class in the reduced training subset.
    #[arg(long, env = "SPIXEL_PER_CLASS", default_value_t = DEFAULT_PER_CLASS)]
    pub per_class: usize,

    /// Keep only the first N training rows of the subset.
    #[arg(long, env = "SPIXEL_LIMIT")]
    pub limit: Option<usize>,

    /// Mask file to use instead of ranking the training subset.
    #[arg(long, env = "SPIXEL_MASK")]
    pub mask: Option<PathBuf>,

    /// Coefficients kept when ranking the training subset.
    #[arg(long, env = "SPIXEL_M", default_value_t = 64)]
    pub m: usize,

    /// Score the test split after every epoch.
    #[arg(long, env = "SPIXEL_VALIDATE")]
    pub validate: bool,
}

pub fn run(global: &Global, args: &TrainArgs, record: &mut Record) -> anyhow::Result<()> {
    let kind = args.model.kind();
    let subset = args.subset.unwrap_or(Subset::default_for(kind.is_reconstructor()));
    let cfg = TrainConfig {
        epochs: args.epochs.unwrap_or(kind.default_epochs()),
        batch_size: args.batch,
        adam: AdamConfig::with_lr(args.lr.unwrap_or(kind.default_learning_rate())),
        seed: global.seed,
    };
    cfg.validate()?;
    record.resolve("subset", serde_json::to_value(subset)?);
    record.resolve("epochs", cfg.epochs);
    record.resolve("lr", cfg.adam.learning_rate);

    let full = load_full(global, SplitName::Train)?;
    let mut rows = subset_rows(full, SplitName::Train, subset, args.per_class, None)?;
    if kind.is_reconstructor() {
        attach_targets(&mut rows);
    }
    let mask = match &args.mask {
        Some(p) => SelectionMask::load(p)?,
        None => mask_for(&rows, args.m)?,
    };
    let train = subset_rows(restrict(&rows, &mask)?, SplitName::Train, Subset::Full, 0, args.limit)?;
    drop(rows);

    let val = if args.validate {
        let mut test = subset_rows(load_full(global, SplitName::Test)?, SplitName::Test, subset, args.per_class, None)?;
        if kind.is_reconstructor() {
            attach_targets(&mut test);
        }
        Some(restrict(&test, &mask)?)
    } else {
        None
    };

    let mut model = Model::build(kind, mask.len(), args.layers, global.seed)?;
    println!(
        "training {kind}: {} parameters, {} rows × {} coefficients, {} epochs",
        model.parameter_count(),
        train.len(),
        mask.len(),
        cfg.epochs
    );
    let history = model.train(&train, val.as_ref(), &cfg)?;
    for r in &history.records {
        match r.val_metric {
            Some(v) => println!("epoch {:>3}  loss {:.6}  val {:.6}", r.epoch, r.train_loss, v),
            None => println!("epoch {:>3}  loss {:.6}", r.epoch, r.train_loss),
        }
    }

    let ckpt = out_path(global, "model.ckpt");
    let hist = out_path(global, "history.csv");
    let mask_path = out_path(global, "mask.txt");
    model.save(&ckpt)?;
    write_text(&hist, &history.to_csv())?;
    mask.save(&mask_path)?;
    record.output("checkpoint", &ckpt);
    record.output("history", &hist);
    record.output("mask", &mask_path);
    record.metric("parameters", model.parameter_count() as f64);
    record.metric("train_rows", train.len() as f64);
    if let Some(last) = history.records.last() {
        record.metric("final_train_loss", last.train_loss);
    }
    if let Some(v) = history.last_metric() {
        record.metric("final_val_metric", v);
    }
    Ok(())
}
