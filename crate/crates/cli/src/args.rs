use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "qgeom",
    version,
    about = "Quantum metric, Berry curvature and Chern numbers of Dirac models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Quantum geometric tensor at sampled or given momenta (JSON).
    Metric,
    /// Determinant identity and hypersphere curvature checks (JSON, exit 4 on violation).
    IdentityCheck,
    /// Chern number of one model on one grid (CSV).
    Chern,
    /// Chern numbers over a list of masses (CSV).
    Sweep,
    /// Curvature of the metric at sampled or given momenta (JSON).
    Geometry,
    /// Metric reconstruction from simulated modulation spectroscopy (JSON).
    Spectroscopy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Metric => "metric",
            Command::IdentityCheck => "identity-check",
            Command::Chern => "chern",
            Command::Sweep => "sweep",
            Command::Geometry => "geometry",
            Command::Spectroscopy => "spectroscopy",
        }
    }
}

/// Flags override the corresponding config-file fields.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Built-in model name (qwz2d, qhz4d).
    #[arg(long, global = true)]
    pub model: Option<String>,

    /// Mass parameter of a built-in model.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub m: Option<f64>,

    /// Grid points per axis.
    #[arg(long, global = true)]
    pub grid: Option<usize>,

    #[arg(long, global = true, value_enum)]
    pub scheme: Option<SchemeArg>,

    /// Finite-difference step for the fd schemes.
    #[arg(long, global = true)]
    pub fd_step: Option<f64>,

    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for grid sums (1 gives bitwise-reproducible output).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for random momentum sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Number of random momenta.
    #[arg(long, global = true)]
    pub samples: Option<usize>,

    /// Comma-separated masses for `sweep`.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub m_values: Option<Vec<f64>>,

    /// Comma-separated momentum; replaces random sampling.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub k: Option<Vec<f64>>,

    /// Drive strength for `spectroscopy`.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,

    /// Multiply the metric by this factor before the identity checks.
    #[arg(long, global = true)]
    pub perturb_metric: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArg {
    Analytic,
    Fd,
    FdProjector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Metric,
    Oracle,
    All,
}
