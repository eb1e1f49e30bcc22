use crate::error::Result;
use crate::samplers::{leapfrog_step, Drift, ParamGroup};
use crate::target::TargetModel;

/// Integrates `m` Cayley leapfrog steps, negates the momenta, integrates `m`
/// more and negates again. Returns the largest entrywise deviation from the
/// starting state.
pub fn reversibility_check<T: TargetModel + ?Sized>(
    target: &T,
    state: &[ParamGroup],
    eps: f64,
    m: usize,
) -> Result<f64> {
    reversibility_check_with(target, state, eps, m, Drift::Cayley)
}

pub fn reversibility_check_with<T: TargetModel + ?Sized>(
    target: &T,
    state: &[ParamGroup],
    eps: f64,
    m: usize,
    drift: Drift,
) -> Result<f64> {
    let mut cur = state.to_vec();
    for _ in 0..m {
        cur = leapfrog_step(target, &cur, eps, drift)?;
    }
    flip(&mut cur);
    for _ in 0..m {
        cur = leapfrog_step(target, &cur, eps, drift)?;
    }
    flip(&mut cur);
    Ok(state
        .iter()
        .zip(&cur)
        .map(|(a, b)| {
            (&a.value - &b.value)
                .amax()
                .max((&a.momentum - &b.momentum).amax())
        })
        .fold(0.0, f64::max))
}

fn flip(groups: &mut [ParamGroup]) {
    for g in groups {
        g.momentum.neg_mut();
    }
}
