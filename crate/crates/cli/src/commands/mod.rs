pub mod evaluate;
pub mod mask;
pub mod pattern;
pub mod prepare;
pub mod qpu;
pub mod rerun;
pub mod sweep;
pub mod train;

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use spixel::experiment::ModelKind;

use crate::Global;

pub fn out_path(global: &Global, name: &str) -> PathBuf {
    global.output_dir.join(name)
}

pub fn write_text(path: &Path, text: &str) -> spixel::Result<()> {
    write_bytes(path, text.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> spixel::Result<()> {
    std::fs::write(path, bytes).map_err(|e| spixel::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Model kinds as the command line spells them.
#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    /// 64 → 128 → 10 dense network.
    ClassicalClassifier,
    /// 64 → 1000 → 2000 → 4000 → 2000 → 1024 dense network.
    ClassicalReconstructor,
    /// Ten 6-qubit circuits with a margin loss.
    QuantumClassifier,
    /// One 10-qubit circuit read out as a 32×32 probability image.
    QuantumReconstructor,
}

impl KindArg {
    pub fn kind(self) -> ModelKind {
        match self {
            KindArg::ClassicalClassifier => ModelKind::ClassicalClassifier,
            KindArg::ClassicalReconstructor => ModelKind::ClassicalReconstructor,
            KindArg::QuantumClassifier => ModelKind::QuantumClassifier,
            KindArg::QuantumReconstructor => ModelKind::QuantumReconstructor,
        }
    }
}
