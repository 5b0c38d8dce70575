use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A quantity is undefined at the given input (e.g. sparsity of the zero vector).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    /// A dimension that must be a power of two is not.
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("size error: {0}")]
    Size(String),
    #[error("index {index} out of range for dimension {dim}")]
    Bounds { index: usize, dim: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// Configuration problems always name the offending key.
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
