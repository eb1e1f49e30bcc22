use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{orthonormality_defect, tangency_defect};
use crate::manifold::{StiefelPoint, TangentVector, ORTH_TOL};
use crate::target::{GroupKind, GroupSpec, TargetModel};

/// One block of parameters with its momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGroup {
    pub kind: GroupKind,
    pub value: DMatrix<f64>,
    pub momentum: DMatrix<f64>,
}

impl ParamGroup {
    pub fn stiefel(point: StiefelPoint) -> Self {
        let value = point.into_matrix();
        let momentum = DMatrix::zeros(value.nrows(), value.ncols());
        Self {
            kind: GroupKind::Stiefel,
            value,
            momentum,
        }
    }

    pub fn stiefel_with_momentum(r: TangentVector) -> Self {
        Self {
            kind: GroupKind::Stiefel,
            value: r.base().as_matrix().clone(),
            momentum: r.into_matrix(),
        }
    }

    pub fn euclidean(value: DMatrix<f64>) -> Self {
        let momentum = DMatrix::zeros(value.nrows(), value.ncols());
        Self {
            kind: GroupKind::Euclidean,
            value,
            momentum,
        }
    }

    pub fn with_momentum(mut self, momentum: DMatrix<f64>) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn point(&self) -> Result<StiefelPoint> {
        StiefelPoint::new(self.value.clone())
    }

    pub fn tangent(&self) -> Result<TangentVector> {
        TangentVector::new(&self.point()?, self.momentum.clone())
    }

    pub fn orthonormality_defect(&self) -> f64 {
        match self.kind {
            GroupKind::Stiefel => orthonormality_defect(&self.value),
            GroupKind::Euclidean => 0.0,
        }
    }

    pub fn tangency_defect(&self) -> f64 {
        match self.kind {
            GroupKind::Stiefel => tangency_defect(&self.value, &self.momentum),
            GroupKind::Euclidean => 0.0,
        }
    }
}

/// Wraps initial values in groups matching the target's declared layout.
pub fn init_groups<T: TargetModel + ?Sized>(
    target: &T,
    values: Vec<DMatrix<f64>>,
) -> Result<Vec<ParamGroup>> {
    let specs = target.groups();
    if specs.len() != values.len() {
        return Err(Error::Contract(format!(
            "target declares {} groups, {} initial values given",
            specs.len(),
            values.len()
        )));
    }
    specs
        .iter()
        .zip(values)
        .map(|(spec, value)| {
            Error::check_shape(spec.shape(), value.shape())?;
            match spec.kind {
                GroupKind::Stiefel => Ok(ParamGroup::stiefel(StiefelPoint::new(value)?)),
                GroupKind::Euclidean => Ok(ParamGroup::euclidean(value)),
            }
        })
        .collect()
}

pub(crate) fn check_groups(specs: &[GroupSpec], groups: &[ParamGroup]) -> Result<()> {
    if specs.len() != groups.len() {
        return Err(Error::Contract(format!(
            "target declares {} groups, state has {}",
            specs.len(),
            groups.len()
        )));
    }
    for (spec, g) in specs.iter().zip(groups) {
        if spec.kind != g.kind {
            return Err(Error::Contract(format!(
                "group '{}' kind mismatch: declared {:?}, got {:?}",
                spec.name, spec.kind, g.kind
            )));
        }
        Error::check_shape(spec.shape(), g.value.shape())?;
        Error::check_shape(spec.shape(), g.momentum.shape())?;
        if spec.kind == GroupKind::Stiefel {
            let defect = orthonormality_defect(&g.value);
            if !(defect <= ORTH_TOL) {
                return Err(Error::NotOrthonormal { defect });
            }
        }
    }
    Ok(())
}
