use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not PSD: pivot {pivot:e} at index {index}")]
    NotPsd { index: usize, pivot: f64 },

    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("exploration incomplete: pair ({i}, {j}) observed {count} time(s)")]
    ExplorationIncomplete { i: usize, j: usize, count: u64 },

    #[error("invalid instance: {}", .0.join("; "))]
    InvalidInstance(Vec<String>),

    #[error("missing feedback: {0}")]
    MissingFeedback(String),

    #[error("instance file: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
