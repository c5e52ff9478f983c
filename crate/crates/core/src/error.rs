use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {what} needs {requested} entries, budget is {budget}")]
    Capacity {
        what: &'static str,
        requested: u128,
        budget: u128,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point is not near-critical: projected gradient norm {grad_norm:e} exceeds {limit:e}")]
    NotNearCritical { grad_norm: f64, limit: f64 },
    #[error("not on the sphere: |‖σ‖² − n| = {deviation:e} for n = {n}")]
    OffSphere { n: usize, deviation: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
