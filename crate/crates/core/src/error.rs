use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments, malformed config, dimension mismatches.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A statistic whose defining denominator vanished (zero spread, zero variance).
    #[error("degenerate statistic: {0}")]
    Degenerate(String),
    /// Numeric or runtime failure while executing an otherwise valid request.
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code convention: 1 for input errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
