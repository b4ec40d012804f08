//! `uisal` command line: one verb per pipeline stage plus the HTTP service.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod service;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "uisal", version, about = "Element-level saliency for mobile UI screenshots")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ManifestArg {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub manifest: ManifestArg,
    /// Overrides the seeds in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Experiment config (JSON); defaults apply to absent fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the per-epoch loss log here.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset: PNG screens plus manifest.json.
    SynthData {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Generator config (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of screens, overriding the config.
        #[arg(long)]
        screens: Option<usize>,
        /// Simulated gaze sessions per screen, overriding the config.
        #[arg(long)]
        sessions: Option<usize>,
    },
    /// Fit the per-session gaze calibration of every screen.
    Calibrate {
        #[command(flatten)]
        manifest: ManifestArg,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn gaze sessions into element ground truth, writing a new manifest.
    GazeToSaliency {
        #[command(flatten)]
        manifest: ManifestArg,
        #[arg(long)]
        out: PathBuf,
        /// Directory for 16-bit PNG pixel heatmaps.
        #[arg(long)]
        heatmaps: Option<PathBuf>,
    },
    /// Pretrain the three scale autoencoders.
    PretrainAe {
        #[command(flatten)]
        train: TrainArgs,
        /// Checkpoint to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the saliency model.
    Train {
        #[command(flatten)]
        train: TrainArgs,
        /// Pretrained autoencoders to start from; pretrains when absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict element saliency for every screen.
    Predict {
        #[command(flatten)]
        manifest: ManifestArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against ground truth (AUC, CC, KL).
    Evaluate {
        #[command(flatten)]
        manifest: ManifestArg,
        #[arg(long, required_unless_present = "uniform")]
        checkpoint: Option<PathBuf>,
        /// Score the uniform baseline instead of a model.
        #[arg(long, conflicts_with = "checkpoint")]
        uniform: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// k-fold cross-validation from scratch.
    Crossval {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = uisal::eval::DEFAULT_FOLDS)]
        folds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every layer and loss; exits 3 on failure.
    Gradcheck {
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve predictions over HTTP.
    Serve {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

/// Marker for failures that map to the numeric exit code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct NumericFailure(pub String);

/// Exit code for an error: numeric failures 3, everything else 2.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let numeric = err.chain().any(|e| {
        e.downcast_ref::<NumericFailure>().is_some()
            || e.downcast_ref::<uisal::Error>().is_some_and(uisal::Error::is_numeric)
    });
    if numeric {
        EXIT_NUMERIC
    } else {
        EXIT_DATA
    }
}

/// Parses `args` (program name first) and runs the verb.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
