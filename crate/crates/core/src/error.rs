use thiserror::Error;

use crate::samplers::ChainRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    Dimension {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid shape {rows}x{cols}: {reason}")]
    Shape {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error("columns are not orthonormal (defect {defect:.3e})")]
    NotOrthonormal { defect: f64 },

    #[error("matrix is not tangent at its base point (skew defect {defect:.3e})")]
    NotTangent { defect: f64 },

    #[error("tangent vectors are attached to different base points")]
    BaseMismatch,

    #[error("Cayley core is singular at step size {eps} (condition number {condition:.3e})")]
    CayleySingular { eps: f64, condition: f64 },

    #[error("numeric stability failure: {0}")]
    NumericStability(String),

    #[error("matrix is rank deficient (smallest pivot {pivot:.3e})")]
    RankDeficient { pivot: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("finite-difference step {fd_step:e} is below the roundoff floor (Richardson disagreement {disagreement:.3e})")]
    Resolution { fd_step: f64, disagreement: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("chain aborted after {} iterations: {cause}", .record.len())]
    ChainAborted {
        record: Box<ChainRecord>,
        cause: Box<Error>,
    },
}

impl Error {
    pub(crate) fn check_shape(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::Dimension { expected, found })
        }
    }
}
