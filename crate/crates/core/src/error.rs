use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{label} failed after {seconds:.6}s: {source}")]
    Timed {
        label: String,
        seconds: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than a failing computation.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Parse { .. } | Error::Format(_) | Error::Integrity(_) | Error::Io { .. } => true,
            Error::Timed { source, .. } => source.is_data_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
