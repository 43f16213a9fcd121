//! `eatsense` command line: runs each pipeline stage from one JSON config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use eatsense::eval::{FeaturePreset, Protocol};
use eatsense::learn::ModelKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Runtime(#[from] eatsense::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl std::fmt::Display, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.to_string(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Runtime(eatsense::Error::Header { .. }) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "eatsense",
    version,
    about = "Eating-event detection from passive smartphone sensing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file; flags below override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (falls back to the config, then EATSENSE_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory for this run.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Event window half-width in minutes.
    #[arg(long, global = true)]
    pub x_half: Option<u32>,
    /// Protocols to evaluate, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub protocol: Vec<Protocol>,
    /// Models to evaluate, comma separated (RF, NB, GB, AB).
    #[arg(long, global = true, value_delimiter = ',')]
    pub model: Vec<ModelKind>,
    /// Feature presets to evaluate, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub features: Vec<FeaturePreset>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort in the ingest schema.
    Synth,
    /// Parse and validate a data directory.
    Ingest {
        #[arg(long)]
        input: PathBuf,
    },
    /// Derive labeled event windows from self-reports.
    Events {
        #[arg(long)]
        input: PathBuf,
    },
    /// Extract the 40 features for every event.
    Featurize {
        #[arg(long)]
        input: PathBuf,
        /// events.csv written by `events`.
        #[arg(long)]
        events: PathBuf,
    },
    /// Eating vs non-eating comparison per feature.
    Stats {
        /// features.csv written by `featurize`.
        #[arg(long)]
        table: PathBuf,
    },
    /// Run the evaluation grid.
    Evaluate {
        #[arg(long)]
        table: PathBuf,
        /// Also fit each (model, features) pair on all rows and save it.
        #[arg(long)]
        save_models: bool,
    },
    /// Re-render reports written by `evaluate`.
    Report {
        /// Output directory of an `evaluate` run.
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
