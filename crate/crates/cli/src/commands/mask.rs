use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use spixel::dataset::SplitName;
use spixel::experiment::mask_for;

use super::out_path;
use crate::data::{load_full, subset_rows, Subset, DEFAULT_PER_CLASS};
use crate::manifest::Record;
use crate::Global;

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SelectMaskArgs {
    /// Number of coefficients to keep.
    #[arg(long, env = "SPIXEL_M", default_value_t = 64)]
    pub m: usize,

    /// Rank on the zeros-and-ones training subset instead of every image.
    #[arg(long, env = "SPIXEL_REDUCED")]
    pub reduced: bool,

    /// Images per class in the reduced subset.
    #[arg(long, env = "SPIXEL_PER_CLASS", default_value_t = DEFAULT_PER_CLASS)]
    pub per_class: usize,

    /// Mask file; defaults to `<output-dir>/mask.txt`.
    #[arg(long, env = "SPIXEL_OUT")]
    pub out: Option<PathBuf>,
}

pub fn run(global: &Global, args: &SelectMaskArgs, record: &mut Record) -> anyhow::Result<()> {
    if args.m == 0 {
        return Err(spixel::Error::Argument("--m must be >= 1".into()).into());
    }
    let subset = if args.reduced { Subset::Reduced } else { Subset::Full };
    let full = load_full(global, SplitName::Train)?;
    let rows = subset_rows(full, SplitName::Train, subset, args.per_class, None)?;
    let mask = mask_for(&rows, args.m)?;
    let path = match &args.out {
        Some(p) => p.clone(),
        None => out_path(global, "mask.txt"),
    };
    mask.save(&path)?;
    println!("kept {} of {} coefficients, ranked on {} images: {}", mask.len(), mask.order().n_total(), rows.len(), path.display());
    record.output("mask", &path);
    record.metric("m", mask.len() as f64);
    record.metric("ranked_images", rows.len() as f64);
    Ok(())
}
