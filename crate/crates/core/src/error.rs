use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or precondition was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Not enough data points for the requested operation.
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// The series has (numerically) zero variance.
    #[error("degenerate variance")]
    DegenerateVariance,

    /// A non-finite value appeared during a numeric computation.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Training diverged (loss became non-finite).
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    /// A malformed input file.
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    /// Underlying I/O failure, tagged with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// The message without the variant prefix, for nesting in itemised
    /// reports.
    pub fn detail(&self) -> String {
        match self {
            Error::InvalidInput(m) => m.clone(),
            other => other.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
