//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by corpus handling, numeric kernels, training and model I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not line up. Names both shapes involved.
    #[error("{op}: dimension mismatch: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// An operation that requires at least one element got none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Invalid configuration value (rates, ratios, fold counts, flags).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed dataset or config file contents; `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Malformed or unsupported model file.
    #[error("model file: {0}")]
    ModelFormat(String),

    /// Non-finite values surfaced during training or evaluation.
    #[error("numeric failure in {tensor}: {message}")]
    Numeric { tensor: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn dimension(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
