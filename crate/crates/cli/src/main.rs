//! `bgfe`: estimation, forecasting and simulation from the command line.

mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use bgfe::Error;
use clap::{Parser, Subcommand};

/// A problem with the invocation or its inputs, reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "bgfe", version, about = "Bayesian grouped fixed-effects estimation with pairwise constraints")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the posterior and write the chain, similarity matrix and partition.
    Estimate(commands::RunArgs),
    /// Predictive distribution for held-out or future periods.
    Forecast(commands::ForecastArgs),
    /// Monte Carlo study on a simulated design.
    Simulate(commands::SimulateArgs),
    /// Pairwise-constrained grouped fixed effects by k-means.
    SpcGfe(commands::SpcGfeArgs),
    /// Turn a prior grouping into a constraint file.
    Pregroup(commands::PregroupArgs),
    /// Posterior similarity matrix from a saved chain.
    Psm(commands::ChainArgs),
    /// Point-estimate partition from a saved chain.
    Partition(commands::ChainArgs),
}

fn is_input_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        if e.is::<UsageError>() {
            return true;
        }
        matches!(
            e.downcast_ref::<Error>(),
            Some(
                Error::PanelNotFound(_)
                    | Error::MissingCell { .. }
                    | Error::DuplicateCell { .. }
                    | Error::NonNumeric { .. }
                    | Error::Schema(_)
                    | Error::HorizonTooLarge { .. }
                    | Error::AccuracyOutOfRange(_)
                    | Error::InvalidConstraint(_)
                    | Error::UnknownUnit(_)
                    | Error::Config(_)
                    | Error::Csv(_)
            )
        )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Estimate(a) => commands::cmd_estimate(a),
        Command::Forecast(a) => commands::cmd_forecast(a),
        Command::Simulate(a) => commands::cmd_simulate(a),
        Command::SpcGfe(a) => commands::cmd_spc_gfe(a),
        Command::Pregroup(a) => commands::cmd_pregroup(a),
        Command::Psm(a) => commands::cmd_psm(a),
        Command::Partition(a) => commands::cmd_partition(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_input_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
