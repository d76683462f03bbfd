mod cli;
mod commands;
mod config;
mod fsutil;
mod server;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::cli::{Cli, Command};
use crate::config::FileConfig;

/// Usage errors (64), dimension mismatches (2), missing weights (3) and
/// malformed rasters (4) have dedicated exit codes; anything else is 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("weight manifest {0} not found (pass --fallback-on-missing or --weights fallback)")]
    MissingWeights(PathBuf),
}

const EXIT_USAGE: u8 = 64;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::MissingWeights(_) => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<streetclear::Error>() {
            use streetclear::Error::*;
            match e {
                DimensionMismatch { .. } => return 2,
                MalformedRaster(_) | ChannelMismatch { .. } | ZeroDimensions => return 4,
                _ => {}
            }
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::ComposeMask(a) => commands::compose_mask(a, &file),
        Command::Inpaint(a) => commands::inpaint(a, &file),
        Command::Metrics(a) => commands::metrics(a),
        Command::AttentionDelta(a) => commands::attention_delta(a),
        Command::ClassifyCanyon(a) => commands::classify(a),
        Command::InsertObjects(a) => commands::insert(a),
        Command::Serve(a) => server::serve(a),
        Command::Report(a) => commands::report(a),
        Command::Pipeline(a) => commands::pipeline(a, &file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
