//! `cbsg` — structured-control loss tables and security investment games.
//!
//! Exit codes:
//!
//! | code | meaning                                                   |
//! |------|-----------------------------------------------------------|
//! | 0    | success                                                   |
//! | 1    | unexpected internal error                                 |
//! | 2    | bad command line                                          |
//! | 3    | input missing, unreadable or malformed                    |
//! | 4    | model or model set violates an invariant                  |
//! | 5    | control synthesis or loss-table computation failed        |
//! | 6    | game configuration invalid or an enumeration cap was hit  |
//! | 7    | sweep finished but some grid points failed                |

mod commands;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cbsg::game::GameError;
use cbsg::lincontrol::{LinControlError, MaskMode, ValidationError};
use cbsg::lossmap::{LossMapError, DEFAULT_NODE_CAP};
use cbsg::modelio::ModelIoError;
use cbsg::robust::RobustError;

#[derive(Parser, Debug)]
#[command(name = "cbsg", version, about = "Cost-based Stackelberg security investment for network control systems")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Accept open-loop modes closer to the imaginary axis (margin 1e-9 instead of 1e-6).
    #[arg(long, global = true)]
    pub allow_marginal: bool,
    /// Loss-table cache directory.
    #[arg(long, global = true, env = "CBSG_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Always recompute loss tables.
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// Refuse models with more nodes than this (the table has 2^n entries).
    #[arg(long, global = true, default_value_t = DEFAULT_NODE_CAP)]
    pub node_cap: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GameArgs {
    /// Attacker cost per node at full effort.
    #[arg(long)]
    pub ga: Option<f64>,
    /// Defender cost per node at full effort.
    #[arg(long)]
    pub gd: Option<f64>,
    /// Attacker level denominator.
    #[arg(long = "La", alias = "la", default_value_t = 3)]
    pub la: u32,
    /// Defender level denominator.
    #[arg(long = "Ld", alias = "ld", default_value_t = 3)]
    pub ld: u32,
    /// JSON file `{"gamma_a": [...], "gamma_d": [...]}` with per-node costs.
    #[arg(long)]
    pub costs: Option<PathBuf>,
    /// Relative payoff tie tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub payoff_tol: f64,
    #[arg(long, default_value = "full_node")]
    pub mode: MaskMode,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameKind {
    /// One model, one game.
    Fixed,
    /// Game over the expected loss of a model set.
    Average,
    /// Nominal-model game evaluated on every model of a set.
    NominalEval,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a model or model-set manifest.
    Validate { path: PathBuf },
    /// Build (or load from cache) the loss table and node-importance report.
    Losses {
        model: PathBuf,
        #[arg(long, default_value = "full_node")]
        mode: MaskMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for the cost-based Stackelberg equilibrium.
    Solve {
        /// Model manifest, or model-set manifest for `--game average|nominal-eval`.
        input: PathBuf,
        #[command(flatten)]
        game: GameArgs,
        #[arg(long = "game", value_enum, default_value = "fixed")]
        kind: GameKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equilibrium payoff over a grid of costs and/or level counts (CSV).
    Sweep {
        model: PathBuf,
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_delimiter = ',')]
        ga_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        gd_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        la_grid: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        ld_grid: Vec<u32>,
        /// Shorthand for the same `--la-grid` and `--ld-grid`.
        #[arg(long, value_delimiter = ',')]
        sweep_levels: Vec<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nominal-model and average-payoff games against per-model ideals.
    Robust {
        set: PathBuf,
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        ga_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        gd_grid: Vec<f64>,
        /// Per-row mismatch CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Boxplot summary JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Individual-optimization baseline next to the equilibrium.
    IoBaseline {
        model: PathBuf,
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the synthetic fixture models.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = cbsg::modelio::fixtures::DEFAULT_SEED)]
        seed: u64,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ModelIoError>() {
            return match e {
                ModelIoError::Validation { .. } | ModelIoError::PartitionTooSmall { .. } => 4,
                _ => 3,
            };
        }
        if cause.is::<ValidationError>() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<RobustError>() {
            return match e {
                RobustError::InvalidSet(_) | RobustError::IndexOutOfRange { .. } => 4,
                RobustError::Game(_) => 6,
                _ => 5,
            };
        }
        if let Some(e) = cause.downcast_ref::<LossMapError>() {
            return match e {
                LossMapError::CapExceeded { .. } => 6,
                LossMapError::WeightSumMismatch { .. } => 4,
                _ => 5,
            };
        }
        if cause.is::<LinControlError>() {
            return 5;
        }
        if cause.is::<GameError>() {
            return 6;
        }
        if cause.is::<commands::PartialFailure>() {
            return 7;
        }
        if cause.is::<commands::UsageError>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
