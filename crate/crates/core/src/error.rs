use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("data error at {location}: {message}")]
    Data { location: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stale neighbor cache: stored digest {stored}, current parcel digest {current}")]
    StaleCache { stored: String, current: String },

    #[error("malformed cache file{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format { line: Option<usize>, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rank-deficient design: {0}")]
    Rank(String),

    #[error("unknown parcel index {0}")]
    Lookup(usize),

    #[error("state error: {0}")]
    State(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    StaleCache,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::StaleCache { .. } => ErrorKind::StaleCache,
            Error::Config(_) => ErrorKind::Usage,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn data(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data { location: location.into(), message: message.into() }
    }

    pub(crate) fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { location: location.into(), message: message.into() }
    }
}
