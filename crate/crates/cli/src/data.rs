//! Full-measurement caches and the row subsets the commands train on.
//!
//! A cache holds all 1024 coefficients of every object in a split plus the
//! labels. Pixel targets are not stored; they come back from the inverse
//! transform, which is exact up to rounding.

use std::path::PathBuf;

use clap::ValueEnum;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use spixel::dataset::{load_cache, load_split, save_cache, MeasurementDataset, SplitName, REDUCED_PER_CLASS};
use spixel::experiment::{full_dataset, limit_rows, two_class_rows};
use spixel::hadamard::fwht_in_place;
use spixel::{Error, Result};

use crate::Global;

pub const SPLITS: [SplitName; 2] = [SplitName::Train, SplitName::Test];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    /// Read from disk.
    Hit,
    /// Derived because no cache existed.
    Created,
    /// The file on disk was unreadable and has been replaced.
    Replaced,
}

pub fn cache_path(global: &Global, split: SplitName) -> PathBuf {
    global
        .cache_dir()
        .join(format!("{}-{}.spqm", split.as_str(), global.resize.as_str()))
}

fn check_full(path: &std::path::Path, ds: &MeasurementDataset) -> Result<()> {
    if ds.mask.len() != ds.mask.order().n_total() || ds.width() != 1024 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("expected 1024 coefficients per row, found {}", ds.width()),
        });
    }
    Ok(())
}

fn derive(global: &Global, split: SplitName) -> Result<MeasurementDataset> {
    let raw = load_split(&global.data_dir, split, global.resize.resize())?;
    let ds = full_dataset(&raw, false)?;
    let path = cache_path(global, split);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    save_cache(&path, &ds)?;
    Ok(ds)
}

/// Full measurements of a split, from the cache when it is usable.
///
/// `force` rebuilds even a valid cache.
pub fn load_full_with_status(global: &Global, split: SplitName, force: bool) -> Result<(MeasurementDataset, CacheStatus)> {
    let path = cache_path(global, split);
    if !path.exists() {
        return Ok((derive(global, split)?, CacheStatus::Created));
    }
    if force {
        return Ok((derive(global, split)?, CacheStatus::Replaced));
    }
    match load_cache(&path).and_then(|ds| check_full(&path, &ds).map(|()| ds)) {
        Ok(ds) => Ok((ds, CacheStatus::Hit)),
        Err(e) => {
            eprintln!("warning: {e}; rebuilding {}", path.display());
            Ok((derive(global, split)?, CacheStatus::Replaced))
        }
    }
}

pub fn load_full(global: &Global, split: SplitName) -> Result<MeasurementDataset> {
    load_full_with_status(global, split, false).map(|(ds, _)| ds)
}

/// Pixel targets recovered from full measurements, clamped to `[0, 1]`.
pub fn attach_targets(ds: &mut MeasurementDataset) {
    let n = ds.width();
    let rows: Vec<Vec<f64>> = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let mut v = ds.features.row(i).to_vec();
            fwht_in_place(&mut v);
            v.iter().map(|x| (x / n as f64).clamp(0.0, 1.0)).collect()
        })
        .collect();
    ds.targets = Some(Array2::from_shape_vec((rows.len(), n), rows.concat()).expect("square rows"));
}

/// Which rows of a split a command works on.
#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subset {
    /// Every image.
    Full,
    /// Zeros then ones: the first `--per-class` of each in the training
    /// split, all of them in the test split.
    Reduced,
}

impl Subset {
    pub fn default_for(reconstructor: bool) -> Self {
        if reconstructor {
            Subset::Reduced
        } else {
            Subset::Full
        }
    }
}

pub const DEFAULT_PER_CLASS: usize = REDUCED_PER_CLASS;

/// Rows of `full` picked by `subset`, then the first `limit` of them.
pub fn subset_rows(
    full: MeasurementDataset,
    split: SplitName,
    subset: Subset,
    per_class: usize,
    limit: Option<usize>,
) -> Result<MeasurementDataset> {
    let picked = match (subset, split) {
        (Subset::Full, _) => full,
        (Subset::Reduced, SplitName::Train) => two_class_rows(&full, Some(per_class))?,
        (Subset::Reduced, SplitName::Test) => two_class_rows(&full, None)?,
    };
    let out = match limit {
        Some(0) => return Err(Error::Argument("--limit must be >= 1".into())),
        Some(n) => limit_rows(&picked, n),
        None => picked,
    };
    if out.is_empty() {
        return Err(Error::Argument(format!("no {} rows left to use", split.as_str())));
    }
    Ok(out)
}
