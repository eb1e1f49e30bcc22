use nalgebra::DMatrix;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    /// Column-orthonormal matrix.
    Stiefel,
    /// Unconstrained real matrix.
    Euclidean,
}

/// Shape and kind of one parameter group declared by a target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    pub name: &'static str,
    pub kind: GroupKind,
    pub rows: usize,
    pub cols: usize,
    /// Euclidean groups only: entries below the diagonal are structurally zero.
    pub upper_triangular: bool,
}

impl GroupSpec {
    pub fn stiefel(name: &'static str, rows: usize, cols: usize) -> Self {
        Self {
            name,
            kind: GroupKind::Stiefel,
            rows,
            cols,
            upper_triangular: false,
        }
    }

    pub fn euclidean(name: &'static str, rows: usize, cols: usize) -> Self {
        Self {
            name,
            kind: GroupKind::Euclidean,
            rows,
            cols,
            upper_triangular: false,
        }
    }

    pub fn upper_triangular(name: &'static str, size: usize) -> Self {
        Self {
            upper_triangular: true,
            ..Self::euclidean(name, size, size)
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Number of free coordinates (Stiefel dimension or unmasked entries).
    pub fn dof(&self) -> usize {
        match self.kind {
            GroupKind::Stiefel => self.rows * self.cols - self.cols * (self.cols + 1) / 2,
            GroupKind::Euclidean if self.upper_triangular => {
                (0..self.cols).map(|j| (j + 1).min(self.rows)).sum()
            }
            GroupKind::Euclidean => self.rows * self.cols,
        }
    }
}

/// A log-density with Euclidean gradients over grouped matrix parameters.
///
/// Gradients are taken in the ambient space; samplers map them to tangent
/// spaces. Implementations must be reentrant.
pub trait TargetModel: Send + Sync {
    fn groups(&self) -> Vec<GroupSpec>;

    /// `log π(θ)` up to an additive constant.
    fn log_density(&self, params: &[DMatrix<f64>]) -> Result<f64>;

    /// `∇ log π(θ)`, one matrix per group (possibly a stochastic estimate).
    fn grad_log_density(&self, params: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>>;

    /// Matrices reported as sample coordinates. Defaults to the raw parameters.
    fn report(&self, params: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        params.to_vec()
    }
}

impl<T: TargetModel + ?Sized> TargetModel for &T {
    fn groups(&self) -> Vec<GroupSpec> {
        (**self).groups()
    }
    fn log_density(&self, params: &[DMatrix<f64>]) -> Result<f64> {
        (**self).log_density(params)
    }
    fn grad_log_density(&self, params: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        (**self).grad_log_density(params)
    }
    fn report(&self, params: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        (**self).report(params)
    }
}

impl<T: TargetModel + ?Sized> TargetModel for Box<T> {
    fn groups(&self) -> Vec<GroupSpec> {
        (**self).groups()
    }
    fn log_density(&self, params: &[DMatrix<f64>]) -> Result<f64> {
        (**self).log_density(params)
    }
    fn grad_log_density(&self, params: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        (**self).grad_log_density(params)
    }
    fn report(&self, params: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        (**self).report(params)
    }
}
