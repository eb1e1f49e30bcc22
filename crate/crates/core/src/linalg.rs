//! Small dense helpers shared by the manifold and target code.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn skew(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a - a.transpose()) * 0.5
}

/// `‖XᵀX − I‖_F`.
pub fn orthonormality_defect(x: &DMatrix<f64>) -> f64 {
    let mut g = x.tr_mul(x);
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    g.norm()
}

/// `‖XᵀZ + ZᵀX‖_F`, zero exactly when `Z` is tangent at `X`.
pub fn tangency_defect(x: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
    let a = x.tr_mul(z);
    (&a + a.transpose()).norm()
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Thin QR with the sign convention `diag(R) ≥ 0`.
///
/// Returns `(Q, R)` with `Q` of shape `n×p` and `R` upper-triangular `p×p`.
pub fn qr_positive(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, p) = x.shape();
    if p == 0 || p > n {
        return Err(Error::Shape {
            rows: n,
            cols: p,
            reason: "thin QR needs 1 <= cols <= rows",
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("QR input"));
    }
    let (q, r) = qr_signed(x);
    let scale = x.norm().max(f64::MIN_POSITIVE);
    let min_pivot = (0..p).map(|j| r[(j, j)]).fold(f64::INFINITY, f64::min);
    if min_pivot <= scale * 1e-13 {
        return Err(Error::RankDeficient { pivot: min_pivot });
    }
    Ok((q, r))
}

/// Householder thin QR with `diag(R) ≥ 0` and no rank check; `Q` is
/// orthonormal even when `x` is rank deficient.
pub fn qr_signed(x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = x.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    (q, r)
}

/// Zeroes the strictly-lower triangle in place.
pub fn mask_upper(m: &mut DMatrix<f64>) {
    let (rows, cols) = m.shape();
    for j in 0..cols {
        for i in (j + 1)..rows {
            m[(i, j)] = 0.0;
        }
    }
}

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

/// Induced 1-norm (max absolute column sum).
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn all_finite(a: &DMatrix<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}
