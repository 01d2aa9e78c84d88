//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty measure: at least one atom is required")]
    EmptyMeasure,

    #[error("atom counts {left} and {right} admit no integer replication factor <= {cap}")]
    IncompatibleAtomCounts { left: usize, right: usize, cap: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("path diverged at step {step}{}", particle.map(|i| format!(" (particle {i})")).unwrap_or_default())]
    DivergedPath { step: usize, particle: Option<usize> },

    #[error("fixed-point iteration did not converge: residual {residual} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("all sampled probe pairs were degenerate (zero denominator)")]
    DegenerateProbe,

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Process exit code used by the CLI: 2 config, 3 divergence, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 2,
            Error::DivergedPath { .. } => 3,
            Error::NonConvergence { .. } => 4,
            _ => 2,
        }
    }
}
