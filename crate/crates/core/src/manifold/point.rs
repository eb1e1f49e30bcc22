use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, gaussian_matrix, orthonormality_defect, qr_positive, tangency_defect};

/// Default tolerance on `‖XᵀX − I‖_F`.
pub const ORTH_TOL: f64 = 1e-10;
/// Default tolerance on `‖XᵀZ + ZᵀX‖_F`.
pub const TAN_TOL: f64 = 1e-10;

/// An `n×p` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    data: DMatrix<f64>,
}

impl StiefelPoint {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(data, ORTH_TOL)
    }

    pub fn with_tolerance(data: DMatrix<f64>, tol: f64) -> Result<Self> {
        let (n, p) = data.shape();
        if p == 0 || p > n {
            return Err(Error::Shape {
                rows: n,
                cols: p,
                reason: "Stiefel points need n >= p >= 1",
            });
        }
        let defect = orthonormality_defect(&data);
        if !(defect <= tol) {
            return Err(Error::NotOrthonormal { defect });
        }
        Ok(Self { data })
    }

    /// Wraps a matrix the caller already knows to be orthonormal.
    pub(crate) fn from_trusted(data: DMatrix<f64>) -> Self {
        Self { data }
    }

    /// Haar-distributed point (QR of a Gaussian matrix, `diag(R) ≥ 0`).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize) -> Result<Self> {
        loop {
            let g = gaussian_matrix(rng, n, p);
            match qr_positive(&g) {
                Ok((q, _)) => return Ok(Self { data: q }),
                Err(Error::RankDeficient { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn defect(&self) -> f64 {
        orthonormality_defect(&self.data)
    }
}

/// A tangent vector together with the point it is attached to.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: StiefelPoint,
    data: DMatrix<f64>,
}

impl TangentVector {
    pub fn new(base: &StiefelPoint, data: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(base, data, TAN_TOL)
    }

    pub fn with_tolerance(base: &StiefelPoint, data: DMatrix<f64>, tol: f64) -> Result<Self> {
        Error::check_shape(base.shape(), data.shape())?;
        let defect = tangency_defect(base.as_matrix(), &data);
        if !(defect <= tol) {
            return Err(Error::NotTangent { defect });
        }
        Ok(Self {
            base: base.clone(),
            data,
        })
    }

    pub fn zero(base: &StiefelPoint) -> Self {
        let (n, p) = base.shape();
        Self {
            base: base.clone(),
            data: DMatrix::zeros(n, p),
        }
    }

    pub(crate) fn from_trusted(base: StiefelPoint, data: DMatrix<f64>) -> Self {
        Self { base, data }
    }

    pub fn base(&self) -> &StiefelPoint {
        &self.base
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn defect(&self) -> f64 {
        tangency_defect(self.base.as_matrix(), &self.data)
    }

    /// Same base point, negated data.
    pub fn flipped(&self) -> Self {
        Self {
            base: self.base.clone(),
            data: -&self.data,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            base: self.base.clone(),
            data: &self.data * c,
        }
    }
}

/// `G − XGᵀX`.
pub fn canonical_projection(x: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let gtx = g.tr_mul(x);
    g - x * gtx
}

/// `G − X sym(XᵀG)`.
pub fn euclidean_projection(x: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let s = linalg::sym(&x.tr_mul(g));
    g - x * s
}

/// Riemannian gradient under the canonical metric of a Euclidean gradient `G`.
pub fn riemannian_grad(x: &StiefelPoint, g: &DMatrix<f64>) -> Result<TangentVector> {
    Error::check_shape(x.shape(), g.shape())?;
    Ok(TangentVector::from_trusted(
        x.clone(),
        canonical_projection(x.as_matrix(), g),
    ))
}

/// `tr(Z₁ᵀ(I − ½XXᵀ)Z₂)`, evaluated without forming an `n×n` matrix.
pub fn canonical_inner(x: &StiefelPoint, z1: &TangentVector, z2: &TangentVector) -> Result<f64> {
    if z1.base() != x || z2.base() != x {
        return Err(Error::BaseMismatch);
    }
    Ok(canonical_inner_raw(
        x.as_matrix(),
        z1.as_matrix(),
        z2.as_matrix(),
    ))
}

pub(crate) fn canonical_inner_raw(x: &DMatrix<f64>, z1: &DMatrix<f64>, z2: &DMatrix<f64>) -> f64 {
    let a = x.tr_mul(z1);
    let b = x.tr_mul(z2);
    z1.dot(z2) - 0.5 * a.dot(&b)
}

/// Ambient standard normal matrix mapped through `G − XGᵀX`.
///
/// Deterministic in `seed`. Note the skew component of the result has twice the
/// variance of a standard Gaussian on the tangent space; see
/// [`sample_tangent_momentum`] for the draw that matches a Frobenius kinetic
/// energy.
pub fn sample_tangent_gaussian(x: &StiefelPoint, seed: u64) -> TangentVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(&mut rng, x.n(), x.p());
    TangentVector::from_trusted(x.clone(), canonical_projection(x.as_matrix(), &g))
}

/// How a momentum draw is mapped into the tangent space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentumLaw {
    /// Orthogonal projection of an ambient standard normal: exactly the
    /// standard Gaussian on `T_X` with the Frobenius inner product, which is
    /// the law `exp(−½‖r‖²_F)` the Hamiltonian assumes.
    #[default]
    Projected,
    /// `G − XGᵀX` applied to an ambient standard normal.
    CanonicalMap,
}

pub fn sample_tangent_momentum<R: Rng + ?Sized>(
    rng: &mut R,
    x: &DMatrix<f64>,
    law: MomentumLaw,
) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, x.nrows(), x.ncols());
    match law {
        MomentumLaw::Projected => euclidean_projection(x, &g),
        MomentumLaw::CanonicalMap => canonical_projection(x, &g),
    }
}

/// Nearest orthonormal frame with the same column span (QR, `diag(R) ≥ 0`).
pub fn reorthonormalize(x: &DMatrix<f64>) -> Result<StiefelPoint> {
    let (q, _) = qr_positive(x)?;
    Ok(StiefelPoint::from_trusted(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Orthonormal complement of the columns of `x`.
    fn complement(x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let p = x.ncols();
        let proj = DMatrix::identity(n, n) - x * x.transpose();
        let svd = proj.svd(true, false);
        let u = svd.u.unwrap();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        DMatrix::from_fn(n, n - p, |i, j| u[(i, idx[j])])
    }

    #[test]
    fn new_rejects_bad_shapes_and_non_orthonormal() {
        assert!(matches!(
            StiefelPoint::new(DMatrix::zeros(2, 3)),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            StiefelPoint::new(DMatrix::identity(3, 2) * 2.0),
            Err(Error::NotOrthonormal { .. })
        ));
        let x = StiefelPoint::new(DMatrix::identity(3, 2)).unwrap();
        assert!(matches!(
            TangentVector::new(&x, DMatrix::identity(3, 2)),
            Err(Error::NotTangent { .. })
        ));
        assert!(matches!(
            riemannian_grad(&x, &DMatrix::zeros(2, 2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn grad_of_symmetric_direction_vanishes() {
        let mut r = rng(1);
        let x = StiefelPoint::random(&mut r, 5, 3).unwrap();
        let s = crate::linalg::sym(&gaussian_matrix(&mut r, 3, 3));
        let g = x.as_matrix() * s;
        let z = riemannian_grad(&x, &g).unwrap();
        assert!(z.as_matrix().norm() < 1e-14);
    }

    #[test]
    fn grad_is_tangent() {
        let mut r = rng(2);
        let x = StiefelPoint::random(&mut r, 4, 2).unwrap();
        let g = gaussian_matrix(&mut r, 4, 2);
        let z = riemannian_grad(&x, &g).unwrap();
        assert!(z.defect() < 1e-12);
    }

    /// Finite-difference oracle: build an orthonormal basis of `T_X` under the
    /// canonical metric from `Z = XA + X⊥B`, differentiate `f` along Cayley
    /// curves in each basis direction, and assemble the gradient.
    #[test]
    fn grad_matches_finite_differences_in_canonical_basis() {
        let mut r = rng(3);
        let (n, p) = (3, 2);
        let x = StiefelPoint::random(&mut r, n, p).unwrap();
        let xm = x.as_matrix().clone();
        let c = gaussian_matrix(&mut r, n, p);
        let w = gaussian_matrix(&mut r, n, n);
        // f(Y) = tr(CᵀY) + ½ tr(YᵀWY), Euclidean gradient C + ½(W + Wᵀ)Y.
        let f = |y: &DMatrix<f64>| c.dot(y) + 0.5 * y.dot(&(&w * y));
        let egrad = &c + (&w + w.transpose()) * 0.5 * &xm;
        let xperp = complement(&xm);

        let mut basis = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                let mut a = DMatrix::zeros(p, p);
                a[(i, j)] = 1.0;
                a[(j, i)] = -1.0;
                // canonical norm² of X A is ½‖A‖² = 1
                basis.push(&xm * a);
            }
        }
        for i in 0..(n - p) {
            for j in 0..p {
                let mut b = DMatrix::zeros(n - p, p);
                b[(i, j)] = 1.0;
                basis.push(&xperp * b);
            }
        }
        assert_eq!(basis.len(), n * p - p * (p + 1) / 2);

        let h = 1e-5;
        let mut fd_grad = DMatrix::zeros(n, p);
        for e in &basis {
            let tv = TangentVector::new(&x, e.clone()).unwrap();
            let (plus, _) = retract_along(&x, &tv, h);
            let (minus, _) = retract_along(&x, &tv, -h);
            let deriv = (f(&plus) - f(&minus)) / (2.0 * h);
            fd_grad += e * deriv;
        }
        let z = riemannian_grad(&x, &egrad).unwrap();
        let err = (z.as_matrix() - &fd_grad).norm() / z.as_matrix().norm();
        assert!(err < 1e-8, "relative error {err}");
    }

    /// Cayley curve through `X` with initial velocity `Z`.
    fn retract_along(x: &StiefelPoint, z: &TangentVector, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        // Q(X, Z, t) X has derivative Z + XXᵀZ at t = 0; use Z' solving
        // Z' + XXᵀZ' = Z, i.e. halve the XᵀZ component.
        let xm = x.as_matrix();
        let half = z.as_matrix() - xm * (xm.tr_mul(z.as_matrix()) * 0.5);
        cayley_step(xm, &half, t).unwrap()
    }

    use super::super::cayley_step;

    #[test]
    fn canonical_inner_properties() {
        let mut r = rng(4);
        let x = StiefelPoint::random(&mut r, 3, 2).unwrap();
        let z0 = TangentVector::zero(&x);
        assert_eq!(canonical_inner(&x, &z0, &z0).unwrap(), 0.0);

        let z1 = riemannian_grad(&x, &gaussian_matrix(&mut r, 3, 2)).unwrap();
        let z2 = riemannian_grad(&x, &gaussian_matrix(&mut r, 3, 2)).unwrap();
        let a = canonical_inner(&x, &z1, &z2).unwrap();
        let b = canonical_inner(&x, &z2, &z1).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(canonical_inner(&x, &z1, &z1).unwrap() > 0.0);

        // dense oracle with explicit n×n intermediate
        let xm = x.as_matrix();
        let m = DMatrix::identity(3, 3) - xm * xm.transpose() * 0.5;
        let dense = (z1.as_matrix().transpose() * m * z2.as_matrix()).trace();
        assert!((a - dense).abs() < 1e-14);

        let other = StiefelPoint::random(&mut r, 3, 2).unwrap();
        assert!(matches!(
            canonical_inner(&other, &z1, &z2),
            Err(Error::BaseMismatch)
        ));
    }

    #[test]
    fn tangent_gaussian_is_tangent_and_deterministic() {
        let mut r = rng(5);
        let x = StiefelPoint::random(&mut r, 6, 3).unwrap();
        let a = sample_tangent_gaussian(&x, 11);
        let b = sample_tangent_gaussian(&x, 11);
        assert_eq!(a, b);
        assert!(a.defect() < 1e-12);
        assert_ne!(a, sample_tangent_gaussian(&x, 12));
    }

    #[test]
    fn tangent_gaussian_has_zero_mean() {
        let mut r = rng(6);
        let x = StiefelPoint::random(&mut r, 3, 2).unwrap();
        let draws = 100_000;
        let mut sum = DMatrix::<f64>::zeros(3, 2);
        let mut sum_sq = DMatrix::<f64>::zeros(3, 2);
        for seed in 0..draws {
            let z = sample_tangent_gaussian(&x, seed as u64);
            sum += z.as_matrix();
            sum_sq += z.as_matrix().component_mul(z.as_matrix());
        }
        let nf = draws as f64;
        for k in 0..6 {
            let mean = sum[k] / nf;
            let var = sum_sq[k] / nf - mean * mean;
            let se = (var / nf).sqrt();
            assert!(
                mean.abs() < 3.0 * se + 1e-12,
                "entry {k}: mean {mean} se {se}"
            );
        }
    }

    #[test]
    fn projected_momentum_is_standard_gaussian_on_tangent_space() {
        // For n = p = 2 the tangent space is one-dimensional, spanned by X J with
        // ‖X J‖_F² = 2, so the coefficient must have variance ½.
        let mut r = rng(7);
        let x = StiefelPoint::random(&mut r, 2, 2).unwrap();
        let xm = x.as_matrix();
        let draws = 50_000;
        let (mut s_proj, mut s_canon) = (0.0, 0.0);
        for _ in 0..draws {
            let a = sample_tangent_momentum(&mut r, xm, MomentumLaw::Projected);
            let b = sample_tangent_momentum(&mut r, xm, MomentumLaw::CanonicalMap);
            s_proj += xm.tr_mul(&a)[(1, 0)].powi(2);
            s_canon += xm.tr_mul(&b)[(1, 0)].powi(2);
        }
        let v_proj = s_proj / draws as f64;
        let v_canon = s_canon / draws as f64;
        assert!((v_proj - 0.5).abs() < 0.02, "{v_proj}");
        assert!((v_canon - 2.0).abs() < 0.08, "{v_canon}");
    }

    #[test]
    fn reorthonormalize_cases() {
        let mut r = rng(8);
        let y = StiefelPoint::random(&mut r, 4, 2).unwrap();
        let same = reorthonormalize(y.as_matrix()).unwrap();
        assert!((same.as_matrix() - y.as_matrix()).norm() < 1e-14);

        let scaled = reorthonormalize(&(y.as_matrix() * 2.0)).unwrap();
        assert!((scaled.as_matrix() - y.as_matrix()).norm() < 1e-14);

        let g = gaussian_matrix(&mut r, 4, 2);
        let q = reorthonormalize(&g).unwrap();
        assert!(q.defect() < 1e-14);
        // span check via projectors
        let gram_inv = (g.transpose() * &g).try_inverse().unwrap();
        let pg = &g * gram_inv * g.transpose();
        let pq = q.as_matrix() * q.as_matrix().transpose();
        assert!((pg - pq).norm() < 1e-12);

        let deficient = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            reorthonormalize(&deficient),
            Err(Error::RankDeficient { .. })
        ));
    }
}
