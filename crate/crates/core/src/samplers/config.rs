use crate::error::{Error, Result};
use crate::manifold::MomentumLaw;

#[derive(Debug, Clone, PartialEq)]
pub struct HmcConfig {
    pub eps: f64,
    /// Leapfrog steps per proposal.
    pub m: usize,
    pub n_samples: usize,
    pub n_burn: usize,
    pub seed: u64,
    pub momentum: MomentumLaw,
    /// Re-orthonormalize Stiefel groups every this many leapfrog steps.
    pub reorth_every: Option<usize>,
}

impl HmcConfig {
    pub fn new(eps: f64, m: usize, n_samples: usize, n_burn: usize, seed: u64) -> Self {
        Self {
            eps,
            m,
            n_samples,
            n_burn,
            seed,
            momentum: MomentumLaw::default(),
            reorth_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.n_burn >= self.n_samples {
            return Err(Error::Config(format!(
                "n_burn ({}) must be below n_samples ({})",
                self.n_burn, self.n_samples
            )));
        }
        if self.reorth_every == Some(0) {
            return Err(Error::Config("reorth_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SghmcConfig {
    pub eps: f64,
    /// Friction, in `[0, 1)`.
    pub alpha: f64,
    /// Gradient-noise estimate, `0 ≤ β̂ < α`.
    pub beta_hat: f64,
    pub m: usize,
    pub n_samples: usize,
    pub n_burn: usize,
    pub seed: u64,
    pub momentum: MomentumLaw,
    /// Project the injected noise onto the tangent space (default). When off,
    /// the ambient draw is added as is and momentum leaves the tangent space.
    pub project_noise: bool,
    /// Record `(H_start, H_end)` per outer iteration (one extra density call).
    pub track_energy: bool,
    pub reorth_every: Option<usize>,
}

impl SghmcConfig {
    pub fn new(eps: f64, alpha: f64, m: usize, n_samples: usize, n_burn: usize, seed: u64) -> Self {
        Self {
            eps,
            alpha,
            beta_hat: 0.0,
            m,
            n_samples,
            n_burn,
            seed,
            momentum: MomentumLaw::default(),
            project_noise: true,
            track_energy: true,
            reorth_every: None,
        }
    }

    pub fn noise_variance(&self) -> f64 {
        2.0 * (self.alpha - self.beta_hat)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.beta_hat >= 0.0) {
            return Err(Error::Config("beta_hat must be nonnegative".into()));
        }
        // α = β̂ = 0 is the deterministic limit; otherwise noise variance must be positive.
        if self.alpha > 0.0 && self.alpha <= self.beta_hat {
            return Err(Error::Config(format!(
                "alpha ({}) must exceed beta_hat ({})",
                self.alpha, self.beta_hat
            )));
        }
        if self.alpha == 0.0 && self.beta_hat != 0.0 {
            return Err(Error::Config(
                "beta_hat must be zero when alpha is zero".into(),
            ));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.n_burn >= self.n_samples {
            return Err(Error::Config(format!(
                "n_burn ({}) must be below n_samples ({})",
                self.n_burn, self.n_samples
            )));
        }
        if self.reorth_every == Some(0) {
            return Err(Error::Config("reorth_every must be positive".into()));
        }
        Ok(())
    }
}
