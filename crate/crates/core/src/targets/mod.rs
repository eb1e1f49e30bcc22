//! Target distributions used by the experiments.

mod lowrank;
mod mixture;
mod noisy;
mod polar;
mod simple;

pub use lowrank::{
    lowrank_grads, lowrank_loglik, predict_and_rmse, LowRankGrads, LowRankModel, LowRankTarget,
    Rating, RATING_RANGE,
};
pub use mixture::{
    mixture_grads, mixture_logpdf, oracle_with_modes, true_sample_oracle, MatrixMixtureTarget,
    QrState,
};
pub use noisy::NoisyGradientWrapper;
pub use polar::{polar_map, polar_target, PolarTarget};
pub use simple::{IsotropicGaussian, LinearStiefel, UniformStiefel};
