//! The Cayley rotation `Q(θ, r, ε) = (I − ε/2·A)⁻¹(I + ε/2·A)` with
//! `A = rθᵀ − θrᵀ`, kept in factored form.
//!
//! `A = U Vᵀ` with `U = [r, −θ]` and `V = [θ, r]`. Woodbury gives
//! `(I − cUVᵀ)⁻¹ = I + cU K⁻¹ Vᵀ` with `K = I₂ₚ − c VᵀU`, `c = ε/2`, and the
//! product collapses to `Q = I + ε U K⁻¹ Vᵀ`. Only `K` (2p×2p) is inverted.

use nalgebra::DMatrix;

use super::point::{StiefelPoint, TangentVector};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, norm1};

/// Condition numbers above this are treated as a pole of the Cayley map.
pub const MAX_CORE_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct CayleyOperator {
    eps: f64,
    left_factor: DMatrix<f64>,
    core_inverse: DMatrix<f64>,
    right_factor: DMatrix<f64>,
}

impl CayleyOperator {
    pub(crate) fn build_raw(theta: &DMatrix<f64>, r: &DMatrix<f64>, eps: f64) -> Result<Self> {
        Error::check_shape(theta.shape(), r.shape())?;
        if !eps.is_finite() {
            return Err(Error::NonFinite("Cayley step size"));
        }
        let (n, p) = theta.shape();
        let mut left = DMatrix::zeros(n, 2 * p);
        left.columns_mut(0, p).copy_from(r);
        left.columns_mut(p, p).copy_from(&(-theta));
        let mut right = DMatrix::zeros(2 * p, n);
        right.rows_mut(0, p).copy_from(&theta.transpose());
        right.rows_mut(p, p).copy_from(&r.transpose());

        let c = 0.5 * eps;
        let mut core = -(&right * &left) * c;
        for i in 0..2 * p {
            core[(i, i)] += 1.0;
        }
        if !all_finite(&core) {
            return Err(Error::NonFinite("Cayley core"));
        }
        let inv = core.clone().try_inverse().ok_or(Error::CayleySingular {
            eps,
            condition: f64::INFINITY,
        })?;
        let condition = norm1(&core) * norm1(&inv);
        if !(condition <= MAX_CORE_CONDITION) {
            return Err(Error::CayleySingular { eps, condition });
        }
        Ok(Self {
            eps,
            left_factor: left,
            core_inverse: inv,
            right_factor: right,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn left_factor(&self) -> &DMatrix<f64> {
        &self.left_factor
    }

    pub fn core_inverse(&self) -> &DMatrix<f64> {
        &self.core_inverse
    }

    pub fn right_factor(&self) -> &DMatrix<f64> {
        &self.right_factor
    }

    pub fn dim(&self) -> usize {
        self.left_factor.nrows()
    }

    /// `Q M` in `O(n p k)` for `M` of shape `n×k`.
    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let inner = &self.core_inverse * (&self.right_factor * m);
        m + &self.left_factor * inner * self.eps
    }

    /// Dense `n×n` matrix; test and audit use only.
    pub fn materialize(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::identity(n, n)
            + &self.left_factor * &self.core_inverse * &self.right_factor * self.eps
    }
}

pub fn cayley_build(theta: &StiefelPoint, r: &TangentVector, eps: f64) -> Result<CayleyOperator> {
    if r.base() != theta {
        return Err(Error::BaseMismatch);
    }
    CayleyOperator::build_raw(theta.as_matrix(), r.as_matrix(), eps)
}

/// `(Qθ, Qr)` on raw matrices; the sampler's inner kernel.
pub fn cayley_step(
    theta: &DMatrix<f64>,
    r: &DMatrix<f64>,
    eps: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, p) = theta.shape();
    let op = CayleyOperator::build_raw(theta, r, eps)?;
    // Apply to [θ, r] in one pass.
    let mut both = DMatrix::zeros(n, 2 * p);
    both.columns_mut(0, p).copy_from(theta);
    both.columns_mut(p, p).copy_from(r);
    let out = op.apply(&both);
    Ok((
        out.columns(0, p).into_owned(),
        out.columns(p, p).into_owned(),
    ))
}

/// Retraction of `θ` along `r` with simultaneous transport of `r`.
pub fn retract_and_transport(
    theta: &StiefelPoint,
    r: &TangentVector,
    eps: f64,
) -> Result<(StiefelPoint, TangentVector)> {
    if r.base() != theta {
        return Err(Error::BaseMismatch);
    }
    let (t, v) = cayley_step(theta.as_matrix(), r.as_matrix(), eps)?;
    let t = StiefelPoint::from_trusted(t);
    Ok((t.clone(), TangentVector::from_trusted(t, v)))
}
