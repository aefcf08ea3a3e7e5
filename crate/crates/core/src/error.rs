use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inputs are inconsistent with each other (dimensions, ranges, indices).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A mathematical invariant of a domain type does not hold.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    /// An operation was applied out of its allowed order.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::InvariantViolation(msg.into())
    }
}
