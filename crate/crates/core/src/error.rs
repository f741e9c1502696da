use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or malformed audio format: {0}")]
    Format(String),

    #[error("invalid sample data: {0}")]
    Data(String),

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("signal too short: need at least {needed} frames, got {got}")]
    InsufficientDuration { needed: usize, got: usize },

    #[error("no loudness blocks survived gating (silent input)")]
    Silence,

    #[error("threshold search failed: {0}")]
    Search(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("external separator failed ({status}): {output}")]
    WrappedProcess { status: String, output: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
