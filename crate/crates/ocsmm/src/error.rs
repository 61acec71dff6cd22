//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by kernel evaluation, the dual solver, data I/O and the
/// surrounding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a precondition (bad dimension, empty input,
    /// incompatible representation, out-of-range parameter).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical guard fired (indefinite matrix beyond jitter tolerance,
    /// broken level-1 kernel, singular system).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A record in a dataset or model file failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
