//! `amem`: train, verify and probe associative-memory networks.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use amem_core::data::DataError;
use amem_core::dynamics::DynError;
use amem_core::io::IoError;
use amem_core::net::NetError;
use amem_core::optim::OptimError;
use amem_core::theory::TheoryError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::BadSpec(_) | DataError::MissingShape | DataError::SubsetTooLarge { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::NonFinite { .. } => CliError::NotConverged(e.to_string()),
            NetError::DimMismatch { .. } | NetError::BadShape(_) => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<OptimError> for CliError {
    fn from(e: OptimError) -> Self {
        match e {
            OptimError::Diverged { .. } => CliError::NotConverged(e.to_string()),
            OptimError::EmptyDataset => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DynError> for CliError {
    fn from(e: DynError) -> Self {
        match e {
            DynError::Diverged { .. } => CliError::NotConverged(e.to_string()),
            DynError::MappingViolated { .. } | DynError::Net(_) | DynError::Data(_) => CliError::Data(e.to_string()),
            DynError::BadInput(_) => CliError::Usage(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<TheoryError> for CliError {
    fn from(e: TheoryError) -> Self {
        match e {
            TheoryError::BadInput(_) => CliError::Usage(e.to_string()),
            TheoryError::NotConverged { .. }
            | TheoryError::MaxSteps { .. }
            | TheoryError::StepUnderflow { .. }
            | TheoryError::NoRoot { .. } => CliError::NotConverged(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "amem", version, about = "Autoencoders and sequence encoders as associative memory")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options mirroring the config keys. Flags override `--config`.
#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    /// `key = value` file, one pair per line, `#` comments.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// ring:N, box:N, mnist:N, unit:N:DIM or file:PATH
    #[arg(long, global = true)]
    pub dataset: Option<String>,
    #[arg(long, global = true)]
    pub mnist_dir: Option<String>,
    #[arg(long, global = true)]
    pub width: Option<String>,
    /// Number of hidden layers.
    #[arg(long, global = true)]
    pub depth: Option<String>,
    #[arg(long, global = true)]
    pub nonlin: Option<String>,
    /// autoencode, sequence or multi_sequence:L
    #[arg(long, global = true)]
    pub objective: Option<String>,
    /// gd, momentum, momentum_wd, rmsprop or adam
    #[arg(long, global = true)]
    pub optimizer: Option<String>,
    #[arg(long, global = true)]
    pub lr: Option<String>,
    /// uniform:A or rank1_equal:U0:V0
    #[arg(long, global = true)]
    pub init: Option<String>,
    #[arg(long, global = true)]
    pub loss_threshold: Option<String>,
    #[arg(long, global = true)]
    pub max_epochs: Option<String>,
    /// Learning rate of an optional gd stage run after the main optimizer.
    #[arg(long, global = true)]
    pub refine_lr: Option<String>,
    #[arg(long, global = true)]
    pub refine_threshold: Option<String>,
    #[arg(long, global = true)]
    pub conv_tol: Option<String>,
    #[arg(long, global = true)]
    pub recover_tol: Option<String>,
    #[arg(long, global = true)]
    pub max_iter: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train to the loss threshold; writes net.amem and train.csv.
    Train,
    /// Spectral radius of the Jacobian at every example; verify.csv.
    Verify {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Iterate from a vector file or a corrupted example; iterate.csv.
    Iterate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// One vector, comma or whitespace separated.
        #[arg(long, conflicts_with = "example")]
        input: Option<PathBuf>,
        /// Dataset index to corrupt.
        #[arg(long)]
        example: Option<usize>,
        /// uniform:P, occlusion:SIDE:COLOR or gaussian:VAR
        #[arg(long, default_value = "uniform:0.25")]
        corrupt: String,
    },
    /// Recovery rate per corruption; recovery.csv.
    Recover {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated corruption specs.
        #[arg(long, default_value = "uniform:0,uniform:0.25,uniform:0.5")]
        corruptions: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Label a 2D grid by iteration limit; basin.ppm, basin.csv, field.csv.
    Basin {
        #[arg(long)]
        checkpoint: PathBuf,
        /// x_min,x_max,y_min,y_max
        #[arg(long, default_value = "-2,2,-2,2", allow_hyphen_values = true)]
        bounds: String,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        #[arg(long, default_value_t = 10)]
        field_stride: usize,
    },
    /// Iterate from a noise pool and cluster non-training limits; spurious.csv.
    Spurious {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated uniform:N or gaussian:VAR:N.
        #[arg(long, default_value = "uniform:500,gaussian:4:500")]
        pool: String,
    },
    /// Gradient-flow limit for rank-1 equal-row inits; theory.csv.
    Theory {
        /// Hidden widths, comma separated; one entry means one hidden layer.
        #[arg(long, default_value = "2")]
        k: String,
        #[arg(long, default_value_t = 1.0)]
        u0: f64,
        #[arg(long, default_value_t = 1.0)]
        v0: f64,
        /// Interior scalars for deep nets, comma separated.
        #[arg(long)]
        w0: Option<String>,
        /// Also train a network with gd and report its eigenvalue.
        #[arg(long)]
        train_check: bool,
        /// Input dimension used by --train-check.
        #[arg(long, default_value_t = 4)]
        k0: usize,
    },
    /// Train and verify every depth x width x objective cell; sweep.csv.
    Sweep {
        #[arg(long, default_value = "1,2")]
        depths: String,
        #[arg(long, default_value = "32,64")]
        widths: String,
        #[arg(long, default_value = "autoencode")]
        objectives: String,
    },
}

fn threads_from_env() {
    if let Some(n) = std::env::var("AMEM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    threads_from_env();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("amem: {e}");
            ExitCode::from(e.code())
        }
    }
}
