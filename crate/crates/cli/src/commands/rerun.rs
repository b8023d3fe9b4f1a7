use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::manifest;
use crate::Global;

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RerunArgs {
    /// A run.json written by an earlier command.
    pub manifest: PathBuf,

    /// Write results here instead of the original output directory.
    #[arg(long, env = "SPIXEL_INTO")]
    pub into: Option<PathBuf>,
}

/// Everything comes from the manifest; only `--into` and `--threads` apply.
pub fn run(_global: &Global, args: &RerunArgs) -> anyhow::Result<()> {
    let m = manifest::read(&args.manifest)?;
    let mut global = m.global;
    if let Some(dir) = &args.into {
        global.output_dir = dir.clone();
    }
    eprintln!("replaying {} from {}", m.invocation.name(), args.manifest.display());
    crate::execute(global, m.invocation)
}
