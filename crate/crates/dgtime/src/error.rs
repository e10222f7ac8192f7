//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {offdiag:.3e})")]
    EigenNonConvergence { sweeps: usize, offdiag: f64 },
    #[error("problem dimension {dim} exceeds the eigensolver cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("unknown problem id: {0}")]
    UnknownProblem(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
