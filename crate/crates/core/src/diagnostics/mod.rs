//! Chain and integrator diagnostics.

mod energy;
mod ess;
mod reversibility;
mod symplectic;

pub use energy::{energy_trace, EnergySummary};
pub use ess::{ess, ess_of_record, ess_series, EssReport};
pub use reversibility::{reversibility_check, reversibility_check_with};
pub use symplectic::{
    step_jacobian, symplectic_residual_at, symplecticity_check, symplecticity_check_with,
    tangent_basis, RESOLUTION_TOL,
};
