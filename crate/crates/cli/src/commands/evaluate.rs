use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use spixel::dataset::SplitName;
use spixel::experiment::{restrict, Model};
use spixel::hadamard::SelectionMask;
use spixel::pgm;

use super::{out_path, write_text};
use crate::data::{attach_targets, load_full, subset_rows, Subset, DEFAULT_PER_CLASS};
use crate::manifest::Record;
use crate::Global;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitArg {
    Train,
    Test,
}

impl SplitArg {
    pub fn split(self) -> SplitName {
        match self {
            SplitArg::Train => SplitName::Train,
            SplitArg::Test => SplitName::Test,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Checkpoint written by `train`.
    #[arg(long, env = "SPIXEL_CHECKPOINT")]
    pub checkpoint: PathBuf,

    /// Mask the model was trained with; defaults to `mask.txt` beside the checkpoint.
    #[arg(long, env = "SPIXEL_MASK")]
    pub mask: Option<PathBuf>,

    /// Split to score.
    #[arg(long, env = "SPIXEL_SPLIT", value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,

    /// Rows to score; reconstructors default to the reduced subset.
    #[arg(long, env = "SPIXEL_SUBSET", value_enum)]
    pub subset: Option<Subset>,

    /// Images per class when the training split is reduced.
    #[arg(long, env = "SPIXEL_PER_CLASS", default_value_t = DEFAULT_PER_CLASS)]
    pub per_class: usize,

    /// Score only the first N rows.
    #[arg(long, env = "SPIXEL_LIMIT")]
    pub limit: Option<usize>,

    /// Images per row of the reconstruction grid.
    #[arg(long, env = "SPIXEL_GRID", default_value_t = 8)]
    pub grid: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Ground truth on the top row, predictions below, `cols` images each,
/// picked evenly across the scored rows.
fn comparison_grid(targets: &ndarray::Array2<f64>, preds: &ndarray::Array2<f64>, cols: usize) -> (usize, usize, Vec<u8>) {
    let n = targets.nrows();
    let cols = cols.min(n).max(1);
    let picks: Vec<usize> = (0..cols).map(|k| k * n / cols).collect();
    let mut cells: Vec<Vec<f64>> = picks.iter().map(|&i| targets.row(i).to_vec()).collect();
    cells.extend(picks.iter().map(|&i| preds.row(i).to_vec()));
    let side = (targets.ncols() as f64).sqrt() as usize;
    pgm::tile(&cells, side, 2, cols)
}

pub fn run(global: &Global, args: &EvaluateArgs, record: &mut Record) -> anyhow::Result<()> {
    if args.grid == 0 {
        return Err(spixel::Error::Argument("--grid must be >= 1".into()).into());
    }
    let model = Model::load(&args.checkpoint)?;
    let kind = model.kind();
    let mask_path = match &args.mask {
        Some(p) => p.clone(),
        None => args.checkpoint.with_file_name("mask.txt"),
    };
    let mask = SelectionMask::load(&mask_path)?;
    let subset = args.subset.unwrap_or(Subset::default_for(kind.is_reconstructor()));
    record.resolve("mask", mask_path.display().to_string());
    record.resolve("subset", serde_json::to_value(subset)?);

    let split = args.split.split();
    let mut rows = subset_rows(load_full(global, split)?, split, subset, args.per_class, args.limit)?;
    if kind.is_reconstructor() {
        attach_targets(&mut rows);
    }
    let data = restrict(&rows, &mask)?;
    drop(rows);
    let eval = model.evaluate(&data)?;

    let report = out_path(global, "evaluation.csv");
    write_text(
        &report,
        &format!(
            "model,split,accuracy,mse,ssim\n{kind},{},{},{},{}\n",
            split.as_str(),
            fmt_opt(eval.accuracy),
            fmt_opt(eval.mse),
            fmt_opt(eval.ssim)
        ),
    )?;
    record.output("report", &report);
    println!("{kind} on {} {} rows", data.len(), split.as_str());
    for (name, v) in [("accuracy", eval.accuracy), ("mse", eval.mse), ("ssim", eval.ssim)] {
        if let Some(v) = v {
            println!("  {name} {v:.6}");
            record.metric(name, v);
        }
    }

    if kind.is_reconstructor() {
        let preds = model.reconstruct(&data)?;
        let targets = data.targets.as_ref().expect("reconstructor rows carry targets");
        let (w, h, px) = comparison_grid(targets, &preds, args.grid);
        let grid = out_path(global, "reconstructions.pgm");
        pgm::write(&grid, w, h, &px)?;
        record.output("grid", &grid);
    }
    Ok(())
}
