//! Command-line front end: `synth`, `train`, `attribute`, `roar`, `report`.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_attribute, cmd_report, cmd_roar, cmd_synth, cmd_train, open_dataset, prepare_output, relevance_file,
    LOG_FILE, RESOLVED_CONFIG_FILE,
};
pub use config::{RunConfig, Settings, DEFAULTS};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "eeg-roar", version, about = "Remove-and-retrain evaluation of attribution methods on EEG CNNs")]
pub struct Cli {
    /// Flat `section.key = value` settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for folds; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override one setting, e.g. `--set train.lr=0.001`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with a planted ground-truth mask.
    Synth,
    /// Leave-one-trial-out training and metrics.
    Train { dataset: PathBuf },
    /// Relevance maps, window aggregates and window tests.
    Attribute {
        dataset: PathBuf,
        /// A `train` or `attribute` output directory to reuse.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Remove-and-retrain sweep with curves and a significance report.
    Roar {
        dataset: PathBuf,
        /// A `train` or `attribute` output directory to reuse.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Recompute summary and report from a `roar` output directory.
    Report { roar_dir: PathBuf },
}

/// Settings from the config file, then `--set` overrides, then `--seed`.
pub fn resolve_settings(cli: &Cli) -> Result<Settings> {
    let mut s = match &cli.config {
        Some(path) => Settings::load(path).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("{}: {source}", path.display())),
            other => other,
        })?,
        None => Settings::default(),
    };
    for pair in &cli.overrides {
        s.set_pair(pair)?;
    }
    if let Some(seed) = cli.seed {
        s.set("seed", &seed.to_string())?;
    }
    Ok(s)
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let settings = resolve_settings(cli)?;
    let cfg = RunConfig::from_settings(&settings)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| Error::Usage(format!("cannot start worker threads: {e}")))?;
    prepare_output(&settings, &cli.out)?;
    let out = cli.out.as_path();
    pool.install(|| match &cli.command {
        Command::Synth => cmd_synth(&cfg, out),
        Command::Train { dataset } => cmd_train(&cfg, dataset, out),
        Command::Attribute { dataset, base } => cmd_attribute(&cfg, dataset, base.as_deref(), out),
        Command::Roar { dataset, base } => cmd_roar(&cfg, dataset, base.as_deref(), out),
        Command::Report { roar_dir } => cmd_report(&cfg, roar_dir, out),
    })
}

/// Exit code for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
