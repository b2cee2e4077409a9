use thiserror::Error;

/// Errors raised by the simulator and algorithm library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("observation matrix is rank deficient (pivot ratio {0:.3e})")]
    RankDeficient(f64),
    #[error("search space too large: {size} candidates exceeds limit {limit}")]
    SearchTooLarge { size: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
