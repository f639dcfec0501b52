use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid chain parameters: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error(
        "{quantity} violated at t = {time}: {value:e} exceeds tolerance {tolerance:e} \
         (step size too large?)"
    )]
    InvariantViolation {
        quantity: &'static str,
        time: f64,
        value: f64,
        tolerance: f64,
    },

    #[error("chain of {n_sites} sites is too large for the dense oracle (limit {limit})")]
    TooLarge { n_sites: usize, limit: usize },

    #[error("trajectory aborted at t = {time}: {reason}")]
    TrajectoryAborted { time: f64, reason: String },

    #[error("power-law fit failed: {0}")]
    Fit(String),

    #[error("invalid sweep configuration: {0}")]
    InvalidSweep(String),
}
