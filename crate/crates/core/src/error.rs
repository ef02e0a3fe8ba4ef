use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("training error at epoch {epoch}, step {step}: {message}")]
    Training {
        epoch: usize,
        step: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape { op, left, right }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
