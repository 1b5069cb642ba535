use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its domain. `name` identifies the offending field.
    #[error("invalid `{name}`: {reason}")]
    Invalid { name: String, reason: String },

    /// A size or memory guard refused the computation.
    #[error("resource guard: {0}")]
    Resource(String),

    /// The computation produced a degenerate quantity (e.g. a vanishing normalizer).
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    /// The operation does not support the given input class.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid { .. } | Error::Unsupported(_) | Error::Format(_) => 2,
            Error::Resource(_) => 3,
            Error::Degenerate(_) => 4,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}
