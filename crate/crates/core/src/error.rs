use thiserror::Error;

/// Errors produced by the simulator and codecs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid integer format: {0}")]
    InvalidFormat(String),
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("non-finite input value at index {0}")]
    NonFinite(usize),
    #[error("value {value} out of range for {format}")]
    OutOfRange { value: i64, format: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed stream: {0}")]
    Malformed(String),
    #[error("accumulator overflow")]
    Overflow,
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
