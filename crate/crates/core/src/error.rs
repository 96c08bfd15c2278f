use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation, metric and optimization routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("degenerate reference: desired signal has zero energy")]
    DegenerateReference,

    #[error("saturation point undefined for alpha = 0")]
    UndefinedSaturation,

    #[error("invalid start point: {0}")]
    InvalidStart(String),

    #[error("grid oracle supports at most 2 parameters, got {0}")]
    UnsupportedMode(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
