use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::target::{GroupSpec, TargetModel};

fn single(params: &[DMatrix<f64>], shape: (usize, usize)) -> Result<&DMatrix<f64>> {
    match params {
        [x] => {
            Error::check_shape(shape, x.shape())?;
            Ok(x)
        }
        _ => Err(Error::Contract(format!(
            "target takes one group, got {}",
            params.len()
        ))),
    }
}

/// Constant density on the Stiefel manifold (the Haar measure).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformStiefel {
    pub n: usize,
    pub p: usize,
}

impl UniformStiefel {
    pub fn new(n: usize, p: usize) -> Self {
        Self { n, p }
    }
}

impl TargetModel for UniformStiefel {
    fn groups(&self) -> Vec<GroupSpec> {
        vec![GroupSpec::stiefel("X", self.n, self.p)]
    }

    fn log_density(&self, params: &[DMatrix<f64>]) -> Result<f64> {
        single(params, (self.n, self.p))?;
        Ok(0.0)
    }

    fn grad_log_density(&self, params: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        single(params, (self.n, self.p))?;
        Ok(vec![DMatrix::zeros(self.n, self.p)])
    }
}

/// Matrix von Mises–Fisher density `log π(X) = tr(FᵀX)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStiefel {
    f: DMatrix<f64>,
}

impl LinearStiefel {
    pub fn new(f: DMatrix<f64>) -> Result<Self> {
        if f.ncols() == 0 || f.ncols() > f.nrows() {
            return Err(Error::Shape {
                rows: f.nrows(),
                cols: f.ncols(),
                reason: "need n >= p >= 1",
            });
        }
        Ok(Self { f })
    }

    pub fn concentration(&self) -> &DMatrix<f64> {
        &self.f
    }
}

impl TargetModel for LinearStiefel {
    fn groups(&self) -> Vec<GroupSpec> {
        vec![GroupSpec::stiefel("X", self.f.nrows(), self.f.ncols())]
    }

    fn log_density(&self, params: &[DMatrix<f64>]) -> Result<f64> {
        Ok(self.f.dot(single(params, self.f.shape())?))
    }

    fn grad_log_density(&self, params: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        single(params, self.f.shape())?;
        Ok(vec![self.f.clone()])
    }
}

/// `𝒩(mean, σ² I)` over one unconstrained matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicGaussian {
    mean: DMatrix<f64>,
    sigma: f64,
}

impl IsotropicGaussian {
    pub fn new(mean: DMatrix<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { mean, sigma })
    }

    pub fn standard(rows: usize, cols: usize) -> Self {
        Self {
            mean: DMatrix::zeros(rows, cols),
            sigma: 1.0,
        }
    }
}

impl TargetModel for IsotropicGaussian {
    fn groups(&self) -> Vec<GroupSpec> {
        vec![GroupSpec::euclidean(
            "x",
            self.mean.nrows(),
            self.mean.ncols(),
        )]
    }

    fn log_density(&self, params: &[DMatrix<f64>]) -> Result<f64> {
        let x = single(params, self.mean.shape())?;
        Ok(-0.5 * (x - &self.mean).norm_squared() / (self.sigma * self.sigma))
    }

    fn grad_log_density(&self, params: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        let x = single(params, self.mean.shape())?;
        Ok(vec![(&self.mean - x) / (self.sigma * self.sigma)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_value_and_gradient() {
        let g = IsotropicGaussian::new(DMatrix::from_element(2, 1, 1.0), 2.0).unwrap();
        let x = DMatrix::from_column_slice(2, 1, &[3.0, 1.0]);
        assert_eq!(g.log_density(std::slice::from_ref(&x)).unwrap(), -0.5);
        assert_eq!(g.grad_log_density(&[x]).unwrap()[0][0], -0.5);
        assert!(IsotropicGaussian::new(DMatrix::zeros(1, 1), 0.0).is_err());
    }

    #[test]
    fn linear_is_trace() {
        let f = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = LinearStiefel::new(f.clone()).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(t.log_density(&[x]).unwrap(), 5.0);
        assert!(LinearStiefel::new(f.transpose()).is_err());
    }

    #[test]
    fn wrong_group_count_is_rejected() {
        let u = UniformStiefel::new(3, 2);
        assert!(u.log_density(&[]).is_err());
        assert!(u.log_density(&[DMatrix::zeros(2, 2)]).is_err());
    }
}
