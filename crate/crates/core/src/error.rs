use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    /// The operating condition cannot be analysed (non-positive speed,
    /// window too short, speed above the configured maximum, ...).
    #[error("invalid operating condition: {0}")]
    InvalidCondition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The signal is shorter than a single analysis window.
    #[error("signal of {len} samples is shorter than one window of {window} samples")]
    EmptyExtraction { len: usize, window: usize },

    /// The condition design matrix is rank deficient.
    #[error("ill-conditioned design: monomials [{}] are collinear with the others", .monomials.join(", "))]
    IllConditionedDesign { monomials: Vec<String> },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file content.
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Whether the error stems from configuration rather than data.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidConfig(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
