//! Sampling kernels over grouped parameters.
//!
//! | kernel | Stiefel drift | correction |
//! |---|---|---|
//! | [`ohmc_sample`] | Cayley retraction + transport | Metropolis |
//! | [`ghmc_sample`] | exact geodesic + parallel transport | Metropolis |
//! | [`hmc_euclidean_sample`] | (Euclidean groups only) | Metropolis |
//! | [`osghmc_sample`] | Cayley retraction + transport | none |
//!
//! Euclidean groups always take the standard leapfrog drift `θ += ε r`.
//! Burn-in and thinning are applied afterwards on [`ChainRecord`].

mod config;
mod group;
mod hmc;
mod integrator;
mod record;
mod sghmc;

pub use config::{HmcConfig, SghmcConfig};
pub use group::{init_groups, ParamGroup};
pub use hmc::{ghmc_sample, hmc_euclidean_sample, ohmc_sample, run_hmc};
pub use integrator::{
    hamiltonian, kinetic_energy, leapfrog_step, leapfrog_stiefel_step, resample_momentum, Drift,
    StepFailure,
};
pub use record::ChainRecord;
pub use sghmc::{osghmc_sample, sghmc_euclidean_sample, sghmc_optimize};
