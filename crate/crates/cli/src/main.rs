//! Command-line surface for the density-estimation pipeline: train models
//! from a run manifest, evaluate held-out NLL and anomaly metrics, draw
//! samples, rank anomalies, run the hyperparameter grid, and gradient-check
//! the analytic gradients.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 numeric, 5 integrity,
//! 1 anything else.

mod commands;

use clap::{Parser, Subcommand};
use red_core::{ErrorCategory, RedError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "red", about = "Recurrent density estimation", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a run manifest (data pipeline + training loop).
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Output root; the run writes into <out>/run-<manifest hash>.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Override the manifest seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint: held-out NLL and, when labels exist,
    /// PR curve / average precision / nDCG.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Scaler file written by `train`; defaults to scaler.json next
        /// to the checkpoint.
        #[arg(long)]
        scaler: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "eval-out")]
        out: PathBuf,
    },
    /// Draw samples in original data units.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scaler: Option<PathBuf>,
        #[arg(short = 'n', long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "sample-out")]
        out: PathBuf,
    },
    /// Score and rank instances by log-likelihood; flag the most anomalous.
    Detect {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scaler: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Flag the k lowest-likelihood instances.
        #[arg(long)]
        top_k: Option<usize>,
        /// Flag instances with log-likelihood at or below this threshold.
        #[arg(long, allow_hyphen_values = true)]
        log_likelihood_threshold: Option<f64>,
        #[arg(long, default_value = "detect-out")]
        out: PathBuf,
    },
    /// Grid search over the manifest's hyperparameter lists.
    Grid {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check analytic gradients against central finite differences on a
    /// small randomized model.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &RedError) -> u8 {
    match err.category() {
        ErrorCategory::Usage => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numeric => 4,
        ErrorCategory::Integrity => 5,
        ErrorCategory::Other => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train { manifest, out, seed } => commands::train(&manifest, &out, seed),
        Command::Eval {
            checkpoint,
            scaler,
            data,
            out,
        } => commands::eval(&checkpoint, scaler.as_deref(), &data, &out),
        Command::Sample {
            checkpoint,
            scaler,
            n,
            seed,
            out,
        } => commands::sample(&checkpoint, scaler.as_deref(), n, seed, &out),
        Command::Detect {
            checkpoint,
            scaler,
            data,
            top_k,
            log_likelihood_threshold,
            out,
        } => commands::detect(
            &checkpoint,
            scaler.as_deref(),
            &data,
            top_k,
            log_likelihood_threshold,
            &out,
        ),
        Command::Grid { manifest, out, seed } => commands::grid(&manifest, &out, seed),
        Command::Gradcheck {
            d,
            seed,
            eps,
            tol,
            out,
        } => commands::gradcheck(d, seed, eps, tol, out.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
