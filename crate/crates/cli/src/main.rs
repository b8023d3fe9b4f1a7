//! `spixel`: data preparation, mask selection, training, evaluation,
//! measurement sweeps, pattern export and QPU time estimates.
//!
//! Flags can also come from `SPIXEL_*` environment variables or from a flat
//! `key=value` file passed with `--config`; an explicit flag wins over the
//! environment, which wins over the file.

mod commands;
mod config;
mod data;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use spixel::dataset::Resize;
use spixel::ErrorKind;

#[derive(Parser, Debug)]
#[command(name = "spixel", version, about = "Single-pixel Hadamard imaging with classical and simulated quantum models")]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Global {
    /// Seed for weight initialization and shuffling.
    #[arg(long, global = true, env = "SPIXEL_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Directory with the MNIST IDX files (plain or gzip-compressed).
    #[arg(long, global = true, env = "SPIXEL_DATA_DIR", default_value = "data/mnist")]
    pub data_dir: PathBuf,

    /// Where results and the run.json manifest are written.
    #[arg(long, global = true, env = "SPIXEL_OUTPUT_DIR", default_value = "runs")]
    pub output_dir: PathBuf,

    /// Measurement caches; defaults to `<data-dir>/cache`.
    #[arg(long, global = true, env = "SPIXEL_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,

    /// Worker threads; all cores when unset. Results do not depend on it.
    #[arg(long, global = true, env = "SPIXEL_THREADS")]
    pub threads: Option<usize>,

    /// How 28×28 digits become 32×32 objects.
    #[arg(long, global = true, env = "SPIXEL_RESIZE", value_enum, default_value_t = ResizeArg::Pad)]
    pub resize: ResizeArg,

    /// Flat `key=value` file supplying defaults for any flag.
    #[arg(long, global = true, env = "SPIXEL_CONFIG")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Global {
    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.data_dir.join("cache"))
    }

    /// Absolute paths, so a manifest can be replayed from anywhere.
    fn absolutize(&mut self) -> anyhow::Result<()> {
        self.data_dir = std::path::absolute(&self.data_dir)?;
        self.output_dir = std::path::absolute(&self.output_dir)?;
        if let Some(c) = &self.cache_dir {
            self.cache_dir = Some(std::path::absolute(c)?);
        }
        Ok(())
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResizeArg {
    /// Zero border of two pixels.
    Pad,
    /// Bilinear interpolation.
    Bilinear,
}

impl ResizeArg {
    pub fn resize(self) -> Resize {
        match self {
            ResizeArg::Pad => Resize::Pad,
            ResizeArg::Bilinear => Resize::Bilinear,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ResizeArg::Pad => "pad",
            ResizeArg::Bilinear => "bilinear",
        }
    }
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "kebab-case")]
pub enum Command {
    /// Decode the IDX files and cache full measurements of both splits.
    Prepare(commands::prepare::PrepareArgs),
    /// Rank coefficients by variance on the training split and write a mask.
    SelectMask(commands::mask::SelectMaskArgs),
    /// Train a model and write its checkpoint and history.
    Train(commands::train::TrainArgs),
    /// Score a checkpoint on a split; reconstructors also get an image grid.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Test metric against the number of kept coefficients.
    Sweep(commands::sweep::SweepArgs),
    /// Write Hadamard patterns as PGM images.
    ExportPattern(commands::pattern::ExportPatternArgs),
    /// Wall-clock estimate of one training epoch on gate-based hardware.
    EstimateQpuTime(commands::qpu::EstimateQpuTimeArgs),
    /// Replay a run from its run.json manifest.
    Rerun(commands::rerun::RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Prepare(_) => "prepare",
            Command::SelectMask(_) => "select-mask",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Sweep(_) => "sweep",
            Command::ExportPattern(_) => "export-pattern",
            Command::EstimateQpuTime(_) => "estimate-qpu-time",
            Command::Rerun(_) => "rerun",
        }
    }
}

fn absolute_opt(p: &mut Option<PathBuf>) -> std::io::Result<()> {
    if let Some(path) = p {
        *path = std::path::absolute(&*path)?;
    }
    Ok(())
}

impl Command {
    /// Path arguments made absolute before they are recorded.
    fn absolutize(&mut self) -> std::io::Result<()> {
        match self {
            Command::SelectMask(a) => absolute_opt(&mut a.out),
            Command::Train(a) => absolute_opt(&mut a.mask),
            Command::Evaluate(a) => {
                a.checkpoint = std::path::absolute(&a.checkpoint)?;
                absolute_opt(&mut a.mask)
            }
            _ => Ok(()),
        }
    }
}

/// Run one command and write its manifest.
pub fn execute(mut global: Global, mut command: Command) -> anyhow::Result<()> {
    global.absolutize()?;
    command.absolutize()?;
    if let Command::Rerun(args) = &command {
        return commands::rerun::run(&global, args);
    }
    std::fs::create_dir_all(&global.output_dir).map_err(|e| spixel::Error::Io {
        path: global.output_dir.clone(),
        source: e,
    })?;
    let mut record = manifest::Record::default();
    match &command {
        Command::Prepare(a) => commands::prepare::run(&global, a, &mut record)?,
        Command::SelectMask(a) => commands::mask::run(&global, a, &mut record)?,
        Command::Train(a) => commands::train::run(&global, a, &mut record)?,
        Command::Evaluate(a) => commands::evaluate::run(&global, a, &mut record)?,
        Command::Sweep(a) => commands::sweep::run(&global, a, &mut record)?,
        Command::ExportPattern(a) => commands::pattern::run(&global, a, &mut record)?,
        Command::EstimateQpuTime(a) => commands::qpu::run(&global, a, &mut record)?,
        Command::Rerun(_) => unreachable!(),
    }
    let path = manifest::write(&global, &command, record)?;
    eprintln!("manifest: {}", path.display());
    Ok(())
}

fn kind_code(e: &spixel::Error) -> u8 {
    match e.kind() {
        ErrorKind::Argument => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

/// 2 for bad arguments, 3 for unreadable or malformed data, 4 for numeric failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<spixel::Error>() {
            return kind_code(e);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let argv: Vec<std::ffi::OsString> = std::env::args_os().collect();
    if let Err(e) = config::inject(&argv, &<Cli as clap::CommandFactory>::command()) {
        eprintln!("error: {e}");
        return ExitCode::from(kind_code(&e));
    }
    let cli = Cli::parse_from(argv);
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.global, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
