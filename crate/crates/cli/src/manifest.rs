//! `run.json`: the resolved invocation plus what it produced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Command, Global};

pub const FILE_NAME: &str = "run.json";

/// Filled in by a command while it runs.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct Record {
    /// Values a command picked on its own, such as per-kind defaults.
    pub resolved: BTreeMap<String, Value>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub metrics: BTreeMap<String, f64>,
}

impl Record {
    pub fn resolve(&mut self, key: &str, value: impl Into<Value>) {
        self.resolved.insert(key.to_string(), value.into());
    }

    pub fn output(&mut self, key: &str, path: &Path) {
        self.outputs.insert(key.to_string(), path.to_path_buf());
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub global: Global,
    pub invocation: Command,
    #[serde(flatten)]
    pub record: Record,
}

pub fn write(global: &Global, command: &Command, record: Record) -> anyhow::Result<PathBuf> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        global: global.clone(),
        invocation: command.clone(),
        record,
    };
    let path = global.output_dir.join(FILE_NAME);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| spixel::Error::Io {
        path: path.clone(),
        source: e,
    })?;
    Ok(path)
}

pub fn read(path: &Path) -> anyhow::Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| spixel::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        spixel::Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("not a run manifest: {e}"),
        }
        .into()
    })
}
