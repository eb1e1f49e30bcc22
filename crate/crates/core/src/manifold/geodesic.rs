use nalgebra::DMatrix;

use super::euclidean_projection;
use super::expm::expm;
use super::point::{StiefelPoint, TangentVector};
use crate::error::{Error, Result};

/// Exact geodesic of the embedded metric with parallel transport of the
/// velocity: `[X', U'] = [X, U] exp(t[[A, −S], [I, A]]) diag(exp(−tA), exp(−tA))`
/// where `A = XᵀU` and `S = UᵀU`.
///
/// The closed form keeps `XᵀX = I` only for exact input, and rounding error
/// compounds across calls. The endpoint therefore gets one Newton–Schulz
/// polar correction `X(3I − XᵀX)/2` (which squares the defect) and the
/// velocity is re-projected onto the corrected tangent space.
pub fn geodesic_step(
    x: &DMatrix<f64>,
    u: &DMatrix<f64>,
    t: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    Error::check_shape(x.shape(), u.shape())?;
    if !t.is_finite() {
        return Err(Error::NonFinite("geodesic time"));
    }
    let (n, p) = x.shape();
    let a = x.tr_mul(u);
    let s = u.tr_mul(u);
    let mut block = DMatrix::zeros(2 * p, 2 * p);
    block.view_mut((0, 0), (p, p)).copy_from(&a);
    block.view_mut((0, p), (p, p)).copy_from(&(-&s));
    block.view_mut((p, p), (p, p)).copy_from(&a);
    for i in 0..p {
        block[(p + i, i)] = 1.0;
    }
    let big = expm(&(block * t))?;
    let rot = expm(&(a * -t))?;

    let mut xu = DMatrix::zeros(n, 2 * p);
    xu.columns_mut(0, p).copy_from(x);
    xu.columns_mut(p, p).copy_from(u);
    let moved = xu * big;
    let x_raw = moved.columns(0, p) * &rot;
    let u_raw = moved.columns(p, p) * &rot;
    let gram = x_raw.tr_mul(&x_raw);
    let x_new = &x_raw * (DMatrix::<f64>::identity(p, p) * 3.0 - gram) * 0.5;
    let u_new = euclidean_projection(&x_new, &u_raw);
    if x_new.iter().chain(u_new.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NumericStability(
            "geodesic endpoint is not finite".into(),
        ));
    }
    Ok((x_new, u_new))
}

pub fn geodesic_flow(
    x: &StiefelPoint,
    u: &TangentVector,
    t: f64,
) -> Result<(StiefelPoint, TangentVector)> {
    if u.base() != x {
        return Err(Error::BaseMismatch);
    }
    let (xn, un) = geodesic_step(x.as_matrix(), u.as_matrix(), t)?;
    let xn = StiefelPoint::from_trusted(xn);
    Ok((xn.clone(), TangentVector::from_trusted(xn, un)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;
    use crate::manifold::{canonical_inner, euclidean_projection};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pair(seed: u64, n: usize, p: usize) -> (StiefelPoint, TangentVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = StiefelPoint::random(&mut rng, n, p).unwrap();
        let g = gaussian_matrix(&mut rng, n, p);
        let z = euclidean_projection(x.as_matrix(), &g);
        let z = TangentVector::new(&x, z).unwrap();
        (x, z)
    }

    #[test]
    fn zero_time_is_identity() {
        let (x, u) = random_pair(1, 4, 2);
        let (x2, u2) = geodesic_flow(&x, &u, 0.0).unwrap();
        assert!((x2.as_matrix() - x.as_matrix()).norm() < 1e-15);
        assert!((u2.as_matrix() - u.as_matrix()).norm() < 1e-15);
    }

    #[test]
    fn stays_on_manifold_and_preserves_canonical_norm() {
        let (x, u) = random_pair(2, 3, 2);
        let (x2, u2) = geodesic_flow(&x, &u, 0.3).unwrap();
        assert!(x2.defect() < 1e-9);
        assert!(u2.defect() < 1e-9);
        let before = canonical_inner(&x, &u, &u).unwrap();
        let after = canonical_inner(&x2, &u2, &u2).unwrap();
        assert!((before - after).abs() < 1e-9 * before);
    }

    #[test]
    fn sphere_is_a_great_circle() {
        let (x, u) = random_pair(3, 3, 1);
        let norm = u.as_matrix().norm();
        let u = u.scaled(1.0 / norm);
        for t in [0.1, 0.7, 2.5] {
            let (x2, u2) = geodesic_flow(&x, &u, t).unwrap();
            let want = x.as_matrix() * t.cos() + u.as_matrix() * t.sin();
            let want_v = -x.as_matrix() * t.sin() + u.as_matrix() * t.cos();
            assert!((x2.as_matrix() - want).norm() < 1e-9);
            assert!((u2.as_matrix() - want_v).norm() < 1e-9);
        }
    }

    #[test]
    fn group_property() {
        let (x, u) = random_pair(4, 5, 3);
        let (t1, t2) = (0.11, 0.23);
        let (xa, ua) = geodesic_flow(&x, &u, t1).unwrap();
        let (xb, ub) = geodesic_flow(&xa, &ua, t2).unwrap();
        let (xc, uc) = geodesic_flow(&x, &u, t1 + t2).unwrap();
        assert!((xb.as_matrix() - xc.as_matrix()).norm() < 1e-8);
        assert!((ub.as_matrix() - uc.as_matrix()).norm() < 1e-8);
    }

    #[test]
    fn slightly_off_manifold_input_is_pulled_back() {
        let (x, u) = random_pair(6, 3, 2);
        let mut xm = x.as_matrix() * (1.0 + 1e-7);
        let mut um = u.as_matrix().clone();
        for _ in 0..200 {
            let (a, b) = geodesic_step(&xm, &um, 0.1).unwrap();
            xm = a;
            um = b;
        }
        assert!(crate::linalg::orthonormality_defect(&xm) < 1e-13);
        assert!(crate::linalg::tangency_defect(&xm, &um) < 1e-13);
    }

    #[test]
    fn huge_velocity_reports_instability() {
        let (x, u) = random_pair(5, 3, 2);
        let u = u.scaled(1e12);
        assert!(matches!(
            geodesic_flow(&x, &u, 1.0),
            Err(Error::NumericStability(_))
        ));
    }
}
