use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the harness library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A CSV or JSON record that does not match its schema. `line` is 1-based
    /// and counts the header line.
    #[error("schema violation at line {line}, column `{column}`: {message}")]
    Schema {
        line: usize,
        column: String,
        message: String,
    },

    #[error("duplicate sample_id `{sample_id}` at rows {first} and {second}")]
    DuplicateSampleId {
        sample_id: String,
        first: usize,
        second: usize,
    },

    #[error("sample_id collision while merging manifests: `{0}`")]
    SampleIdCollision(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("metric computation requires {0}")]
    Metric(String),

    #[error("backend for run `{run_id}` failed: {message} (log: {log})")]
    Backend {
        run_id: String,
        message: String,
        log: PathBuf,
    },

    #[error("score file {path} does not cover the test manifest: {message}")]
    Coverage { path: PathBuf, message: String },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse grouping used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Backend { .. } => ErrorKind::Backend,
            _ => ErrorKind::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Backend,
    Io,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
