//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension or shape mismatch between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value or argument violated an operation's contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed input file (CSV, IDX, checkpoint).
    #[error("parse error: {0}")]
    Parse(String),

    /// Invalid experiment or training configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Data constraint violation (insufficient samples, bad labels, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
