//! Experiment driver for conformal prediction interval counterfactuals.
//!
//! Every subcommand is driven by one JSON config (or a built-in profile),
//! derives all stage seeds from the config's master seed, writes its
//! artifacts into `--out`, and records them in a run manifest. Exit codes:
//! 0 success, 2 config error, 3 data error, 4 soft experiment failure
//! (counterfactual attrition above the configured threshold).

mod commands;
mod config;
mod manifest;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use commands::{cmd_augment, cmd_cpicf, cmd_delta, cmd_gen_data, cmd_train, cmd_width_map, CpicfArgs, Outcome};
use config::{ExperimentConfig, Profile};
use manifest::RunRecorder;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),
}

impl From<cpicf_core::tabular::TabularError> for CliError {
    fn from(e: cpicf_core::tabular::TabularError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<cpicf_core::gbt::GbtError> for CliError {
    fn from(e: cpicf_core::gbt::GbtError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<cpicf_core::conformal::ConformalError> for CliError {
    fn from(e: cpicf_core::conformal::ConformalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<cpicf_core::cpicf::CpicfError> for CliError {
    fn from(e: cpicf_core::cpicf::CpicfError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<cpicf_core::search::SearchError> for CliError {
    fn from(e: cpicf_core::search::SearchError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<cpicf_core::eval::EvalError> for CliError {
    fn from(e: cpicf_core::eval::EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "cpicf", version, about = "Conformal prediction interval counterfactual experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config JSON; overrides --profile entirely.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in config profile used when --config is absent.
    #[arg(long, global = true, value_enum, default_value = "desk")]
    profile: Profile,

    /// Output directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Replace existing artifacts instead of failing.
    #[arg(long, global = true)]
    overwrite: bool,

    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the dataset CSV, schema sidecar, and split index file.
    GenData,
    /// Train the entity classifier; write model, metrics, and PR curve.
    Train,
    /// Evaluate interval widths and set sizes over a 2-D grid.
    WidthMap,
    /// Generate counterfactuals and write them as JSON lines.
    Cpicf {
        /// Explicit query as a JSON array; numbers for continuous features,
        /// strings for categorical ones.
        #[arg(long)]
        query: Option<String>,
        /// Queries sampled from the training split when --query is absent.
        #[arg(long, default_value_t = 1)]
        queries: usize,
        /// Counterfactuals per query.
        #[arg(long, default_value_t = 1)]
        per_query: usize,
    },
    /// Run the local prediction-improvement experiment.
    Delta,
    /// Run the data-augmentation benchmark.
    Augment,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config '{}': {e}", path.display()))
            })?;
            ExperimentConfig::from_json(&text)
        }
        None => Ok(ExperimentConfig::profile(cli.profile)),
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let config = load_config(cli)?;

    #[cfg(feature = "parallel")]
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    if cli.threads.is_some() {
        eprintln!("note: built without the parallel feature; --threads is ignored");
    }

    let command_name = match &cli.command {
        Command::GenData => "gen-data",
        Command::Train => "train",
        Command::WidthMap => "width-map",
        Command::Cpicf { .. } => "cpicf",
        Command::Delta => "delta",
        Command::Augment => "augment",
    };
    let mut recorder = RunRecorder::new(command_name, &cli.out, cli.overwrite)?;
    let outcome = match &cli.command {
        Command::GenData => cmd_gen_data(&config, &mut recorder)?,
        Command::Train => cmd_train(&config, &mut recorder)?,
        Command::WidthMap => cmd_width_map(&config, &mut recorder)?,
        Command::Cpicf { query, queries, per_query } => {
            let args = CpicfArgs { query: query.clone(), queries: *queries, per_query: *per_query };
            cmd_cpicf(&config, &args, &mut recorder)?
        }
        Command::Delta => cmd_delta(&config, &mut recorder)?,
        Command::Augment => cmd_augment(&config, &mut recorder)?,
    };
    recorder.finish(&config)?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::SoftFailure(message)) => {
            eprintln!("soft failure: {message}");
            ExitCode::from(4)
        }
        Err(CliError::Config(message)) => {
            eprintln!("config error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Data(message)) => {
            eprintln!("data error: {message}");
            ExitCode::from(3)
        }
    }
}
