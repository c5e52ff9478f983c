//! Desk-scale fully connected trainer with AnnealSGD.

pub mod data;
pub mod error;
pub mod mlp;
pub mod optim;
pub mod train;

pub use data::{load_idx, parse_idx, synth_blobs, Dataset, Split, VALIDATION_FRACTION};
pub use error::{Result, TrainError};
pub use mlp::{gradient_check, Mlp, MlpSpec};
pub use optim::{Optimizer, OptimizerConfig};
pub use train::{min_abs_gradient, train, EpochMetrics, PerturbationMode, TrainConfig, TrainMetrics};
