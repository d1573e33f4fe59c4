//! Batch pipeline driver.
//!
//! Subcommands mirror the experiment flow: `gen-data` → `pretrain` →
//! `train` → `extract` / `eval`, plus the analytic `params` table. Shared
//! settings come from a JSON config file; command-line flags override it,
//! and the effective configuration is echoed next to every output.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data or format
//! error, 3 training/evaluation runtime error.

mod config;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Parser, Subcommand};

use iristex::Error;

#[derive(Parser)]
#[command(name = "iristex", version, about = "texture-aware iris verification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic texture dataset with a manifest.
    GenData {
        /// JSON config; the `synth` section controls generation.
        #[arg(long)]
        spec: Option<std::path::PathBuf>,
        /// Output directory for PGM files and manifest.csv.
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Stage 1: pre-train the encoder with the reconstruction objective.
    Pretrain {
        /// Dataset directory (must contain manifest.csv).
        #[arg(long)]
        data: std::path::PathBuf,
        #[arg(long)]
        config: Option<std::path::PathBuf>,
        /// Checkpoint file to write; a loss CSV lands next to it.
        #[arg(long)]
        out: std::path::PathBuf,
        /// Pooling kind override: eap | max.
        #[arg(long)]
        pool: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Stage 2: train a classifier variant, optionally from a stage-1 checkpoint.
    Train {
        #[arg(long)]
        data: std::path::PathBuf,
        #[arg(long)]
        config: Option<std::path::PathBuf>,
        /// `random` or a path to a stage-1 checkpoint.
        #[arg(long, default_value = "random")]
        init: String,
        /// Pooling kind override: eap | max.
        #[arg(long)]
        pool: Option<String>,
        /// Head kind override: tel | fc.
        #[arg(long)]
        head: Option<String>,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Extract signatures for every sample of a dataset into a CSV.
    Extract {
        #[arg(long)]
        model: std::path::PathBuf,
        #[arg(long)]
        data: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Verification metrics: DET curve, EER, AUC.
    Eval {
        #[arg(long)]
        model: std::path::PathBuf,
        #[arg(long)]
        data: std::path::PathBuf,
        /// `within` (held-out classes of the training corpus) or `cross`
        /// (5-fold over a disjoint corpus).
        #[arg(long, default_value = "within")]
        protocol: String,
        #[arg(long)]
        config: Option<std::path::PathBuf>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Analytic parameter-count table for a classifier variant.
    Params {
        /// Pooling kind: eap | max (no effect on counts; part of the variant name).
        #[arg(long, default_value = "eap")]
        pool: String,
        /// Head kind: tel | fc.
        #[arg(long)]
        head: String,
        /// Number of training classes.
        #[arg(long)]
        classes: usize,
        /// Input resolution the head is sized for.
        #[arg(long, default_value_t = 512)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Contract(_) => 1,
        Error::Io(_)
        | Error::Json(_)
        | Error::Format { .. }
        | Error::Input(_)
        | Error::CkptVersion { .. }
        | Error::CkptChecksum { .. }
        | Error::CkptShape { .. } => 2,
        Error::Training { .. }
        | Error::State(_)
        | Error::Protocol(_)
        | Error::Capability(_)
        | Error::DegenerateBatch
        | Error::DegenerateSignature
        | Error::ShapeMismatch { .. } => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are successful outputs, everything else is usage
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
