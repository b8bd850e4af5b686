use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
///
/// Variants are grouped so a driver can map them onto exit statuses:
/// configuration problems, bad data, and numerical aborts.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed container {path}: {reason}")]
    Container { path: PathBuf, reason: String },

    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadLength { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("numerical abort: {0}")]
    NumericalAbort(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn container(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Container {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Broad category used by command-line front ends.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => ErrorKind::Config,
            Error::NumericalAbort(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
