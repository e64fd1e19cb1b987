// `!(x > 0.0)`-style guards reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! `oucast`: fit, simulate, and evaluate an exogenous-input mean-reverting
//! stochastic process for probabilistic time-series prediction.

mod commands;
mod config;
mod dataset;
mod outputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CommandContext;

#[derive(Parser)]
#[command(
    name = "oucast",
    version,
    about = "Probabilistic time-series prediction with a mean-reverting SDE",
    long_about = "Fits an Ornstein-Uhlenbeck process whose mean level and volatility are \
functions of exogenous input channels, samples predictive path ensembles, and evaluates \
calibration (PIT, KS, Q-Q) and cumulative output."
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "oucast.toml")]
    config: PathBuf,
    /// Output directory; defaults to the config's out_dir or the current one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known ground-truth parameters.
    Synth,
    /// Fit the model on the configured training data.
    Fit,
    /// Sample a predictive ensemble for an input CSV (target not required).
    Predict {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Input CSV with time and channel columns.
        #[arg(long)]
        inputs: PathBuf,
        /// Also dump the full path matrix (large).
        #[arg(long)]
        paths: bool,
    },
    /// Predict and score calibration against observed targets.
    Evaluate {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// CSV with time, channel, and target columns.
        #[arg(long)]
        data: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match CommandContext::new(&cli.config, cli.out, cli.seed, cli.quiet) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let result = match &cli.command {
        Command::Synth => commands::synth(&ctx),
        Command::Fit => commands::fit(&ctx),
        Command::Predict {
            model,
            inputs,
            paths,
        } => commands::predict(&ctx, model, inputs, *paths),
        Command::Evaluate { model, data } => commands::evaluate(&ctx, model, data),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
