use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum QptError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model family {family} does not conserve total S_z; sectors are unsupported")]
    UnsupportedSector { family: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("site index {index} out of range for a chain of {n_sites} sites")]
    IndexOutOfRange { index: usize, n_sites: usize },

    #[error("eigensolver did not converge after {iterations} Krylov steps (best residual {best_residual:.3e})")]
    Convergence { iterations: usize, best_residual: f64 },

    #[error("numerical integrity violated: {0}")]
    NumericalIntegrity(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, QptError>;
