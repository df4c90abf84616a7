//! `beamcast` — traffic forecasting and provisioning from the command line.
//!
//! Subcommands cover the whole pipeline: synthetic data generation, model
//! training, forecasting, allocation evaluation, the closed-loop simulator,
//! and the gradient verification suite. Exit codes: 0 success, 1 validation
//! or usage error, 2 runtime error. All randomness comes from explicit
//! seeds; no output file is left behind partially written.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use beamcast_core::error::{Error, Result};
use beamcast_core::{decision, files, lstm, metrics, sff, sim, timeseries, verify};

mod commands;

#[derive(Parser)]
#[command(name = "beamcast", version, about = "Probabilistic traffic forecasting and resource provisioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Sff,
    Lstm,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-beam traffic CSV.
    GenData(GenDataArgs),
    /// Train a forecasting model on a traffic CSV.
    Train(TrainArgs),
    /// Forecast one horizon per beam from a trained model.
    Forecast(ForecastArgs),
    /// Turn a forecast file into allocations and audit them.
    Evaluate(EvaluateArgs),
    /// Run the closed-loop provisioning simulation.
    Simulate(SimulateArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Generator spec JSON (see docs for the schema).
    #[arg(long)]
    spec: PathBuf,
    /// Generator seed.
    #[arg(long)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Which model to train.
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Traffic CSV (schema: timestamp,beam_id,traffic).
    #[arg(long)]
    data: PathBuf,
    /// Training config JSON; must carry the seed.
    #[arg(long)]
    config: PathBuf,
    /// Output checkpoint path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ForecastArgs {
    /// Trained model checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Traffic CSV supplying the context windows.
    #[arg(long)]
    data: PathBuf,
    /// Forecast origin in epoch-hours: context ends here, horizon starts.
    #[arg(long)]
    origin: i64,
    /// Output forecast CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Forecast CSV produced by `forecast` or `simulate`.
    #[arg(long)]
    forecast: PathBuf,
    /// Traffic CSV with the realized values.
    #[arg(long)]
    data: PathBuf,
    /// Allocation policy: `point`, `quantile:P`, or `headroom:F`.
    #[arg(long)]
    policy: String,
    /// Output report JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation config JSON (unknown keys rejected).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the run artifacts.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Seed for the randomized toy instances.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // Usage problems are validation errors: help text to stderr.
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let outcome = match cli.command {
        Command::GenData(args) => commands::gen_data(&args),
        Command::Train(args) => commands::train(&args),
        Command::Forecast(args) => commands::forecast(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Gradcheck(args) => commands::gradcheck(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
