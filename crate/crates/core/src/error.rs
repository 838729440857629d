use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the planner library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("link distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("link spectral efficiency underflows to zero at {distance} m")]
    ZeroRateLink { distance: f64 },

    #[error("integrand is singular on [{lo}, {hi}] m (link rate vanishes)")]
    IntegrandSingularity { lo: f64, hi: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}]")]
    QuadratureDiverged { lo: f64, hi: f64 },

    #[error("total traffic arrival rate is zero")]
    ZeroTotalTraffic,

    #[error("station bandwidth limit is zero")]
    ZeroBandwidthLimit,

    #[error("active power {active} W must exceed sleep power {sleep} W")]
    DegeneratePowers { active: f64, sleep: f64 },

    #[error("infeasible action: battery would go to {pre_clamp} J")]
    InfeasibleAction { pre_clamp: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("joint state space needs {required} evaluations, budget is {budget}")]
    StateSpaceBudgetExceeded { required: u128, budget: u128 },

    #[error("unstable input: load {0} must be below 1")]
    UnstableInput(f64),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidScenario(_)
            | Error::InvalidGeometry(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::Json { .. }
            | Error::Csv(_) => 2,
            Error::StateSpaceBudgetExceeded { .. } => 3,
            Error::Io { .. } => 1,
            _ => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
