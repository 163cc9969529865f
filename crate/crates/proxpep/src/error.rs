//! Crate-wide error type.

use crate::driver::Trajectory;
use crate::subproblem::SubproblemSolution;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("problem generation failed: {0}")]
    Generation(String),

    #[error("subproblem residual {residual:.3e} after {iterations} iterations (requested {tol:.3e})")]
    SubproblemConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
        /// Best iterate reached before giving up.
        best: Box<SubproblemSolution>,
    },

    #[error("inner proximal solve stalled at residual {residual:.3e} after {iterations} iterations")]
    InnerSolveConvergence { iterations: usize, residual: f64 },

    #[error("run aborted at iteration {iteration}")]
    RunAborted {
        iteration: usize,
        source: Box<Error>,
        /// Trajectory covering the iterations completed before the abort.
        partial: Box<Trajectory>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
