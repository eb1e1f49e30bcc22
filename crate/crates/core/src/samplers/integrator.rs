use nalgebra::DMatrix;
use rand::Rng;

use super::group::{check_groups, ParamGroup};
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, mask_upper};
use crate::manifold::{
    canonical_projection, cayley_step, euclidean_projection, geodesic_step, reorthonormalize,
    sample_tangent_momentum, MomentumLaw,
};
use crate::target::{GroupKind, GroupSpec, TargetModel};

/// How Stiefel groups move during the drift half of a leapfrog step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drift {
    /// `θ' = Qθ`, `r' = Qr` with the Cayley rotation `Q(θ, r, ε)`; force is
    /// the canonical Riemannian gradient.
    Cayley,
    /// Exact geodesic of the embedded metric with parallel transport; force
    /// is the orthogonally projected gradient.
    Geodesic,
    /// Cayley retraction of `θ` but no transport: `r` is re-projected onto the
    /// new tangent space. Not symplectic; kept as a negative control.
    RetractOnly,
}

impl Drift {
    fn force(self, x: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Drift::Cayley | Drift::RetractOnly => canonical_projection(x, g),
            Drift::Geodesic => euclidean_projection(x, g),
        }
    }

    fn advance(
        self,
        x: &DMatrix<f64>,
        r: &DMatrix<f64>,
        eps: f64,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match self {
            Drift::Cayley => cayley_step(x, r, eps),
            Drift::Geodesic => geodesic_step(x, r, eps),
            Drift::RetractOnly => {
                let (xn, _) = cayley_step(x, r, eps)?;
                let rn = euclidean_projection(&xn, r);
                Ok((xn, rn))
            }
        }
    }
}

/// Why a leapfrog step did not complete.
#[derive(Debug)]
pub enum StepFailure {
    /// The target failed to evaluate; chains abort.
    Target(Error),
    /// The manifold integrator failed (Cayley pole, exponential overflow);
    /// the proposal counts as rejected.
    Integrator(Error),
}

impl From<StepFailure> for Error {
    fn from(f: StepFailure) -> Self {
        match f {
            StepFailure::Target(e) | StepFailure::Integrator(e) => e,
        }
    }
}

/// Positions and momenta of all groups, kept apart so positions can be handed
/// to the target without copying.
#[derive(Debug, Clone)]
pub(crate) struct PhaseState {
    pub values: Vec<DMatrix<f64>>,
    pub momenta: Vec<DMatrix<f64>>,
}

impl PhaseState {
    pub fn from_groups(groups: &[ParamGroup]) -> Self {
        Self {
            values: groups.iter().map(|g| g.value.clone()).collect(),
            momenta: groups.iter().map(|g| g.momentum.clone()).collect(),
        }
    }

    pub fn into_groups(self, specs: &[GroupSpec]) -> Vec<ParamGroup> {
        specs
            .iter()
            .zip(self.values.into_iter().zip(self.momenta))
            .map(|(s, (value, momentum))| ParamGroup {
                kind: s.kind,
                value,
                momentum,
            })
            .collect()
    }
}

pub(crate) fn masked_grad(
    specs: &[GroupSpec],
    mut grads: Vec<DMatrix<f64>>,
) -> Result<Vec<DMatrix<f64>>> {
    if grads.len() != specs.len() {
        return Err(Error::Contract(format!(
            "target returned {} gradients for {} groups",
            grads.len(),
            specs.len()
        )));
    }
    for (s, g) in specs.iter().zip(grads.iter_mut()) {
        Error::check_shape(s.shape(), g.shape())?;
        if s.upper_triangular {
            mask_upper(g);
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target gradient"));
        }
    }
    Ok(grads)
}

pub(crate) fn eval_grad<T: TargetModel + ?Sized>(
    target: &T,
    specs: &[GroupSpec],
    values: &[DMatrix<f64>],
) -> Result<Vec<DMatrix<f64>>> {
    masked_grad(specs, target.grad_log_density(values)?)
}

pub(crate) fn kick(
    specs: &[GroupSpec],
    state: &mut PhaseState,
    grads: &[DMatrix<f64>],
    scale: f64,
    drift: Drift,
) {
    for ((s, (x, r)), g) in specs
        .iter()
        .zip(state.values.iter().zip(state.momenta.iter_mut()))
        .zip(grads)
    {
        match s.kind {
            GroupKind::Stiefel => *r += drift.force(x, g) * scale,
            GroupKind::Euclidean => *r += g * scale,
        }
    }
}

pub(crate) fn drift_all(
    specs: &[GroupSpec],
    state: &mut PhaseState,
    eps: f64,
    drift: Drift,
) -> Result<()> {
    for (s, (x, r)) in specs
        .iter()
        .zip(state.values.iter_mut().zip(state.momenta.iter_mut()))
    {
        match s.kind {
            GroupKind::Stiefel => {
                let (xn, rn) = drift.advance(x, r, eps)?;
                *x = xn;
                *r = rn;
            }
            GroupKind::Euclidean => *x += &*r * eps,
        }
    }
    Ok(())
}

pub(crate) fn repair(specs: &[GroupSpec], state: &mut PhaseState) -> Result<()> {
    for (s, (x, r)) in specs
        .iter()
        .zip(state.values.iter_mut().zip(state.momenta.iter_mut()))
    {
        if s.kind == GroupKind::Stiefel {
            *x = reorthonormalize(x)?.into_matrix();
            *r = euclidean_projection(x, r);
        }
    }
    Ok(())
}

/// Runs `steps` leapfrog steps. `grads` holds the (masked) gradient at the
/// current positions on entry and at the final positions on exit.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate<T: TargetModel + ?Sized>(
    target: &T,
    specs: &[GroupSpec],
    state: &mut PhaseState,
    grads: &mut Vec<DMatrix<f64>>,
    eps: f64,
    steps: usize,
    drift: Drift,
    reorth_every: Option<usize>,
) -> std::result::Result<(), StepFailure> {
    for step in 1..=steps {
        kick(specs, state, grads, 0.5 * eps, drift);
        drift_all(specs, state, eps, drift).map_err(StepFailure::Integrator)?;
        if let Some(k) = reorth_every {
            if step % k == 0 {
                repair(specs, state).map_err(StepFailure::Integrator)?;
            }
        }
        *grads = eval_grad(target, specs, &state.values).map_err(StepFailure::Target)?;
        kick(specs, state, grads, 0.5 * eps, drift);
    }
    Ok(())
}

pub fn kinetic_energy(momenta: &[DMatrix<f64>]) -> f64 {
    0.5 * momenta.iter().map(|r| r.norm_squared()).sum::<f64>()
}

pub(crate) fn hamiltonian_raw<T: TargetModel + ?Sized>(
    target: &T,
    state: &PhaseState,
) -> Result<f64> {
    let logp = target.log_density(&state.values)?;
    if !logp.is_finite() {
        return Err(Error::NonFinite("log density"));
    }
    Ok(-logp + kinetic_energy(&state.momenta))
}

/// `H(θ, r) = −log π(θ) + ½ Σ ‖r‖²_F` (identity mass).
pub fn hamiltonian<T: TargetModel + ?Sized>(target: &T, groups: &[ParamGroup]) -> Result<f64> {
    check_groups(&target.groups(), groups)?;
    hamiltonian_raw(target, &PhaseState::from_groups(groups))
}

/// Draws fresh momenta: tangent Gaussians for Stiefel groups, standard normal
/// (masked) for Euclidean ones.
pub fn resample_momentum<R: Rng + ?Sized>(
    rng: &mut R,
    specs: &[GroupSpec],
    groups: &mut [ParamGroup],
    law: MomentumLaw,
) {
    let mut state = PhaseState::from_groups(groups);
    draw_momenta(rng, specs, &mut state, law);
    for (g, r) in groups.iter_mut().zip(state.momenta) {
        g.momentum = r;
    }
}

pub(crate) fn draw_momenta<R: Rng + ?Sized>(
    rng: &mut R,
    specs: &[GroupSpec],
    state: &mut PhaseState,
    law: MomentumLaw,
) {
    for (s, (x, r)) in specs
        .iter()
        .zip(state.values.iter().zip(state.momenta.iter_mut()))
    {
        *r = match s.kind {
            GroupKind::Stiefel => sample_tangent_momentum(rng, x, law),
            GroupKind::Euclidean => {
                let mut g = gaussian_matrix(rng, s.rows, s.cols);
                if s.upper_triangular {
                    mask_upper(&mut g);
                }
                g
            }
        };
    }
}

/// One leapfrog step over all groups (half-kick, drift, half-kick).
pub fn leapfrog_step<T: TargetModel + ?Sized>(
    target: &T,
    groups: &[ParamGroup],
    eps: f64,
    drift: Drift,
) -> Result<Vec<ParamGroup>> {
    let specs = target.groups();
    check_groups(&specs, groups)?;
    let mut state = PhaseState::from_groups(groups);
    let mut grads = eval_grad(target, &specs, &state.values)?;
    integrate(target, &specs, &mut state, &mut grads, eps, 1, drift, None)?;
    Ok(state.into_groups(&specs))
}

/// One oHMC leapfrog step for a target with a single Stiefel group.
pub fn leapfrog_stiefel_step<T: TargetModel + ?Sized>(
    target: &T,
    group: &ParamGroup,
    eps: f64,
) -> Result<ParamGroup> {
    let specs = target.groups();
    if specs.len() != 1 || specs[0].kind != GroupKind::Stiefel || group.kind != GroupKind::Stiefel {
        return Err(Error::Contract(
            "leapfrog_stiefel_step needs a target with exactly one Stiefel group".into(),
        ));
    }
    let out = leapfrog_step(target, std::slice::from_ref(group), eps, Drift::Cayley)?;
    Ok(out.into_iter().next().expect("one group"))
}
