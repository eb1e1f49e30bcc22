//! Hamiltonian Monte Carlo on the Stiefel manifold.
//!
//! Orthonormal-column parameters are integrated with a Cayley retraction that
//! moves the position and transports the momentum in one rotation, so chains
//! never leave the manifold. Geodesic and unconstrained baselines share the
//! same outer loop.
//!
//! ```
//! use orthohmc::{ohmc_sample, init_groups, HmcConfig, StiefelPoint, UniformStiefel};
//! use rand::SeedableRng;
//!
//! let target = UniformStiefel::new(3, 2);
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let x0 = StiefelPoint::random(&mut rng, 3, 2).unwrap();
//! let init = init_groups(&target, vec![x0.into_matrix()]).unwrap();
//! let chain = ohmc_sample(&target, &init, &HmcConfig::new(0.1, 10, 200, 100, 7)).unwrap();
//! assert_eq!(chain.len(), 200);
//! ```

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
mod error;
pub mod linalg;
pub mod manifold;
pub mod parallel;
pub mod samplers;
mod target;
pub mod targets;

pub use error::{Error, Result};
pub use manifold::{
    canonical_inner, cayley_build, geodesic_flow, reorthonormalize, retract_and_transport,
    riemannian_grad, sample_tangent_gaussian, CayleyOperator, MomentumLaw, StiefelPoint,
    TangentVector,
};
pub use samplers::{
    ghmc_sample, hamiltonian, hmc_euclidean_sample, init_groups, leapfrog_stiefel_step,
    ohmc_sample, osghmc_sample, sghmc_euclidean_sample, ChainRecord, Drift, HmcConfig, ParamGroup,
    SghmcConfig,
};
pub use target::{GroupKind, GroupSpec, TargetModel};
pub use targets::{
    IsotropicGaussian, LinearStiefel, LowRankModel, LowRankTarget, MatrixMixtureTarget,
    NoisyGradientWrapper, QrState, Rating, UniformStiefel,
};
