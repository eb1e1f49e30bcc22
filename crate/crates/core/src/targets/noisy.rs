use std::sync::Mutex;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::target::{GroupSpec, TargetModel};

/// Adds `𝒩(0, σ²_noise)` to every gradient entry of the wrapped target; the
/// log-density passes through unchanged.
///
/// Owns one seeded stream. Use one wrapper per chain.
#[derive(Debug)]
pub struct NoisyGradientWrapper<T> {
    inner: T,
    sigma_noise: f64,
    rng: Mutex<ChaCha8Rng>,
}

impl<T> NoisyGradientWrapper<T> {
    pub fn new(inner: T, sigma_noise: f64, seed: u64) -> Result<Self> {
        if !(sigma_noise >= 0.0 && sigma_noise.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_noise must be finite and nonnegative, got {sigma_noise}"
            )));
        }
        Ok(Self {
            inner,
            sigma_noise,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        })
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }

    pub fn sigma_noise(&self) -> f64 {
        self.sigma_noise
    }

    pub fn inject_noise(&self, mut grads: Vec<DMatrix<f64>>) -> Vec<DMatrix<f64>> {
        if self.sigma_noise == 0.0 {
            return grads;
        }
        let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
        for g in grads.iter_mut() {
            for v in g.iter_mut() {
                *v += self.sigma_noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        grads
    }
}

impl<T: TargetModel> TargetModel for NoisyGradientWrapper<T> {
    fn groups(&self) -> Vec<GroupSpec> {
        self.inner.groups()
    }

    fn log_density(&self, params: &[DMatrix<f64>]) -> Result<f64> {
        self.inner.log_density(params)
    }

    fn grad_log_density(&self, params: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        Ok(self.inject_noise(self.inner.grad_log_density(params)?))
    }

    fn report(&self, params: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        self.inner.report(params)
    }
}
