//! Crate-wide error type.

use thiserror::Error;

/// Every failure the library can report.
///
/// Each variant maps onto one of the command-line exit codes through
/// [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },

    #[error("block size must be at least 1 (offset {offset})")]
    SizeZero { offset: usize },

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("the zero vector is not a valid state")]
    ZeroState,

    #[error("duplicate amplitude index {0:?}")]
    DuplicateIndex([usize; 3]),

    #[error("amplitude index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { index: [usize; 3], dims: [usize; 3] },

    #[error("state is not fully entangled: {0}")]
    NotFullyEntangled(String),

    #[error("numerically ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("weighted vectors are not balanced (residual {0:e})")]
    Unbalanced(f64),

    #[error("no convergence within the iteration budget (best residual {best:e})")]
    NoConvergence { best: f64 },

    #[error("determinant drifted from 1 by {0:e}")]
    DeterminantDrift(f64),

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotFullyEntangled(_) => 2,
            Error::IllConditioned(_) | Error::DeterminantDrift(_) | Error::NoConvergence { .. } => 3,
            Error::PreconditionViolated(_) | Error::Unbalanced(_) => 4,
            Error::Io(_) => 5,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
