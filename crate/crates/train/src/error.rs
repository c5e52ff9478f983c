use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed IDX data: {0}")]
    Format(String),
    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Divergence { epoch: usize, step: u64, loss: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Core(#[from] annealscape_core::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;

pub(crate) fn invalid(msg: impl Into<String>) -> TrainError {
    TrainError::InvalidParameter(msg.into())
}
