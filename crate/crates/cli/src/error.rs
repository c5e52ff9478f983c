use std::path::{Path, PathBuf};

use annealscape_core::Error as CoreError;
use annealscape_train::TrainError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const CAPACITY: i32 = 4;
    pub const DIVERGENCE: i32 = 5;
    pub const CHECK_FAILED: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Capacity(String),
    #[error("{0}")]
    Divergence(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("{0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } | CliError::Format(_) => exit::IO,
            CliError::Capacity(_) => exit::CAPACITY,
            CliError::Divergence(_) => exit::DIVERGENCE,
            CliError::CheckFailed(_) => exit::CHECK_FAILED,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Capacity { .. } => CliError::Capacity(e.to_string()),
            CoreError::InvalidParameter(_) | CoreError::DimensionMismatch { .. } => {
                CliError::Usage(e.to_string())
            }
            CoreError::Io(source) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            CoreError::Json(_) => CliError::Format(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Io { path, source } => CliError::Io { path, source },
            TrainError::Format(_) => CliError::Format(e.to_string()),
            TrainError::Divergence { .. } => CliError::Divergence(e.to_string()),
            TrainError::InvalidParameter(_) => CliError::Usage(e.to_string()),
            TrainError::Core(inner) => inner.into(),
        }
    }
}
