//! Numerical laboratory for perturbed spherical p-spin glasses and the
//! AnnealSGD gradient perturbation.

pub mod anneal;
pub mod census;
pub mod descent;
pub mod error;
pub mod export;
pub mod hamiltonian;
pub mod regimes;
pub mod seed;

pub use error::{Error, Result};
pub use hamiltonian::{
    energy, gradient, hessian, sample_disorder, Disorder, DisorderSpec, ExternalField, FieldSpec,
    Landscape, SpinConfiguration,
};
