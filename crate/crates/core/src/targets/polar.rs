use nalgebra::DMatrix;

use super::mixture::MatrixMixtureTarget;
use crate::error::{Error, Result};
use crate::target::{GroupSpec, TargetModel};

/// The mixture density seen through the unconstrained parameterization
/// `Q = X(XᵀX)^{-1/2}`. The density is flat along `X → cX`.
#[derive(Debug, Clone)]
pub struct PolarTarget {
    inner: MatrixMixtureTarget,
}

pub fn polar_target(target: MatrixMixtureTarget) -> PolarTarget {
    PolarTarget { inner: target }
}

struct PolarParts {
    q: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    eigvecs: DMatrix<f64>,
    eigvals: Vec<f64>,
}

fn decompose(x: &DMatrix<f64>) -> Result<PolarParts> {
    let s = x.tr_mul(x);
    let eig = s.symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min > max * 1e-14) || !max.is_finite() {
        return Err(Error::RankDeficient {
            pivot: min.max(0.0).sqrt(),
        });
    }
    let v = eig.eigenvectors;
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        lam.len(),
        lam.iter().map(|l| 1.0 / l.sqrt()),
    ));
    let inv_sqrt = &v * d * v.transpose();
    Ok(PolarParts {
        q: x * &inv_sqrt,
        inv_sqrt,
        eigvecs: v,
        eigvals: lam,
    })
}

/// `X(XᵀX)^{-1/2}` via the eigendecomposition of `XᵀX`.
pub fn polar_map(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(decompose(x)?.q)
}

/// Pulls `G_Q = ∂L/∂Q` back to `∂L/∂X` through the polar map.
fn pullback(x: &DMatrix<f64>, parts: &PolarParts, gq: &DMatrix<f64>) -> DMatrix<f64> {
    let v = &parts.eigvecs;
    let h = v.transpose() * x.tr_mul(gq) * v;
    let lam = &parts.eigvals;
    // divided differences of λ^{-1/2}
    let f = DMatrix::from_fn(lam.len(), lam.len(), |i, j| {
        let (a, b) = (lam[i].sqrt(), lam[j].sqrt());
        -1.0 / (a * b * (a + b))
    });
    let gamma = v * h.component_mul(&f) * v.transpose();
    gq * &parts.inv_sqrt + x * (&gamma + gamma.transpose())
}

impl PolarTarget {
    pub fn inner(&self) -> &MatrixMixtureTarget {
        &self.inner
    }

    fn split<'a>(
        &self,
        params: &'a [DMatrix<f64>],
    ) -> Result<(&'a DMatrix<f64>, &'a DMatrix<f64>)> {
        let (n, p) = self.inner.shape();
        if params.len() != 2 {
            return Err(Error::Contract(format!(
                "polar target takes 2 groups, got {}",
                params.len()
            )));
        }
        Error::check_shape((n, p), params[0].shape())?;
        Error::check_shape((p, p), params[1].shape())?;
        Ok((&params[0], &params[1]))
    }
}

impl TargetModel for PolarTarget {
    fn groups(&self) -> Vec<GroupSpec> {
        let (n, p) = self.inner.shape();
        vec![
            GroupSpec::euclidean("X", n, p),
            GroupSpec::upper_triangular("R", p),
        ]
    }

    fn log_density(&self, params: &[DMatrix<f64>]) -> Result<f64> {
        let (x, r) = self.split(params)?;
        let q = polar_map(x)?;
        Ok(self.inner.logpdf_from(&q, r))
    }

    fn grad_log_density(&self, params: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        let (x, r) = self.split(params)?;
        let parts = decompose(x)?;
        let (gq, gr) = self.inner.grads_from(&parts.q, r);
        Ok(vec![pullback(x, &parts, &gq), gr])
    }

    fn report(&self, params: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        match polar_map(&params[0]) {
            Ok(q) => vec![q, params[1].clone()],
            Err(_) => params.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, mask_upper, orthonormality_defect};
    use crate::manifold::StiefelPoint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthonormal_input_is_fixed_and_scale_is_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = StiefelPoint::random(&mut rng, 3, 2).unwrap().into_matrix();
        assert!((polar_map(&y).unwrap() - &y).norm() < 1e-14);
        for c in [0.01, 3.0, 250.0] {
            assert!((polar_map(&(&y * c)).unwrap() - &y).norm() < 1e-13);
        }
        let x = gaussian_matrix(&mut rng, 4, 2);
        assert!(orthonormality_defect(&polar_map(&x).unwrap()) < 1e-13);
        let a = polar_map(&x).unwrap();
        let b = polar_map(&(&x * 7.5)).unwrap();
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn rank_deficient_input_is_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.5, 1.0]);
        assert!(matches!(polar_map(&x), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mix = MatrixMixtureTarget::grid(3, 2, 16, 0.5).unwrap();
        let t = polar_target(mix);
        for trial in 0..5 {
            let x = gaussian_matrix(&mut rng, 3, 2) * (0.5 + trial as f64);
            let mut r = gaussian_matrix(&mut rng, 2, 2) + DMatrix::from_element(2, 2, 1.5);
            mask_upper(&mut r);
            let params = vec![x.clone(), r.clone()];
            let g = t.grad_log_density(&params).unwrap();
            let h = 1e-6;
            for k in 0..x.len() {
                let mut xp = x.clone();
                xp[k] += h;
                let mut xm = x.clone();
                xm[k] -= h;
                let fp = t.log_density(&[xp, r.clone()]).unwrap();
                let fm = t.log_density(&[xm, r.clone()]).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (fd - g[0][k]).abs() <= 1e-6 * g[0][k].abs().max(1.0),
                    "trial {trial} X[{k}]: fd {fd} analytic {}",
                    g[0][k]
                );
            }
        }
    }
}
