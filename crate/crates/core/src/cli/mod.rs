//! The `appnet` command line: one binary with `validate`, `train`, `predict`,
//! `experiment`, `synth` and `stats` subcommands.
//!
//! Exit codes are 0 on success, 2 for configuration or data problems and 3 for
//! runtime or protocol failures. Every command that writes artifacts puts them
//! under `<outdir>/<run-id>/` next to a `manifest.json`. The run id is a hash of
//! the command, the resolved configuration and the input bytes, so reruns land
//! in the same directory with the same bytes.

mod commands;
mod config;

pub use config::{check_key, ConfigError, Flag, NetworkEntry, RunConfig, KEYS};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::harness::HarnessError;
use crate::netdata::DataError;
use crate::solver::SolverError;
use crate::synthgen::SynthError;

#[derive(Debug, Parser)]
#[command(name = "appnet", version, about = "Composite social-network model of app adoption")]
pub struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the configuration and data files and print dataset statistics.
    Validate(RunArgs),
    /// Fit the model on every app and write the parameters.
    Train(RunArgs),
    /// Score apps with trained parameters.
    Predict(RunArgs),
    /// Run an experimental protocol and write its reports.
    Experiment(RunArgs),
    /// Generate a synthetic dataset with planted parameters.
    Synth(RunArgs),
    /// Print adoption statistics as JSON.
    Stats(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration file of `key = value` lines.
    #[arg(short, long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override or add a configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Leave networks unscaled unless a per-network mode says otherwise.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", join_lines(.0))]
    Config(Vec<ConfigError>),
    #[error("{context}: {source}")]
    Data { context: String, source: DataError },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{0}")]
    Runtime(String),
}

fn join_lines(errors: &[ConfigError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Data { .. } | CliError::Synth(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn data(context: impl Into<String>, source: DataError) -> Self {
        CliError::Data { context: context.into(), source }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(vec![e])
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidSpec(m) => ConfigError::Invalid(m).into(),
            HarnessError::Solver(SolverError::InvalidConfig(m)) => ConfigError::Invalid(m).into(),
            HarnessError::Data(d) => CliError::data("experiment data", d),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.jobs {
        None => commands::dispatch(&cli.command),
        Some(0) => Err(ConfigError::Invalid("--jobs must be at least 1".into()).into()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
            pool.install(|| commands::dispatch(&cli.command))
        }
    }
}
