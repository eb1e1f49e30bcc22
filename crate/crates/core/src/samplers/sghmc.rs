use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::SghmcConfig;
use super::group::{check_groups, ParamGroup};
use super::integrator::{draw_momenta, eval_grad, hamiltonian_raw, repair, PhaseState};
use super::record::ChainRecord;
use crate::error::{Error, Result};
use crate::linalg::mask_upper;
use crate::manifold::{canonical_projection, cayley_step, euclidean_projection};
use crate::target::{GroupKind, GroupSpec, TargetModel};

fn aborted(record: ChainRecord, cause: Error) -> Error {
    Error::ChainAborted {
        record: Box::new(record),
        cause: Box::new(cause),
    }
}

struct Friction {
    eps: f64,
    alpha: f64,
    noise_sd: f64,
    project_noise: bool,
}

/// Drift then friction/gradient/noise update for every group:
/// `θ ← Qθ`, `r̂ ← Qr` (or `θ += εr` for Euclidean groups), then
/// `r ← (1 − α) r̂ + ε ∇̂ log π(θ) + ξ`.
fn inner_step<T: TargetModel + ?Sized, R: Rng + ?Sized>(
    target: &T,
    specs: &[GroupSpec],
    state: &mut PhaseState,
    fr: &Friction,
    rng: &mut R,
) -> std::result::Result<(), (bool, Error)> {
    for (s, (x, r)) in specs
        .iter()
        .zip(state.values.iter_mut().zip(state.momenta.iter_mut()))
    {
        match s.kind {
            GroupKind::Stiefel => {
                let (xn, rn) = cayley_step(x, r, fr.eps).map_err(|e| (false, e))?;
                *x = xn;
                *r = rn;
            }
            GroupKind::Euclidean => *x += &*r * fr.eps,
        }
    }
    let grads = eval_grad(target, specs, &state.values).map_err(|e| (true, e))?;
    for ((s, (x, r)), g) in specs
        .iter()
        .zip(state.values.iter().zip(state.momenta.iter_mut()))
        .zip(&grads)
    {
        let mut xi = if fr.noise_sd > 0.0 {
            DMatrix::from_fn(s.rows, s.cols, |_, _| {
                fr.noise_sd * rng.sample::<f64, _>(StandardNormal)
            })
        } else {
            DMatrix::zeros(s.rows, s.cols)
        };
        match s.kind {
            GroupKind::Stiefel => {
                if fr.project_noise {
                    xi = euclidean_projection(x, &xi);
                }
                *r = &*r * (1.0 - fr.alpha) + canonical_projection(x, g) * fr.eps + xi;
            }
            GroupKind::Euclidean => {
                if s.upper_triangular {
                    mask_upper(&mut xi);
                }
                *r = &*r * (1.0 - fr.alpha) + g * fr.eps + xi;
            }
        }
    }
    Ok(())
}

/// Stochastic-gradient oHMC: momentum is resampled each outer iteration,
/// `cfg.m` friction steps follow, and there is no Metropolis correction.
pub fn osghmc_sample<T: TargetModel + ?Sized>(
    target: &T,
    init: &[ParamGroup],
    cfg: &SghmcConfig,
) -> Result<ChainRecord> {
    cfg.validate()?;
    let specs = target.groups();
    check_groups(&specs, init)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut record = ChainRecord::with_capacity(cfg.n_samples);
    let mut state = PhaseState::from_groups(init);
    let fr = Friction {
        eps: cfg.eps,
        alpha: cfg.alpha,
        noise_sd: cfg.noise_variance().sqrt(),
        project_noise: cfg.project_noise,
    };
    let mut steps_done = 0usize;

    for _ in 0..cfg.n_samples {
        let start = Instant::now();
        draw_momenta(&mut rng, &specs, &mut state, cfg.momentum);
        let h_start = if cfg.track_energy {
            match hamiltonian_raw(target, &state) {
                Ok(h) => h,
                Err(e) => return Err(aborted(record, e)),
            }
        } else {
            f64::NAN
        };
        let snapshot = state.clone();
        let mut failed = false;
        for _ in 0..cfg.m {
            match inner_step(target, &specs, &mut state, &fr, &mut rng) {
                Ok(()) => {}
                Err((true, e)) => return Err(aborted(record, e)),
                Err((false, _)) => {
                    failed = true;
                    break;
                }
            }
            steps_done += 1;
            if let Some(k) = cfg.reorth_every {
                if steps_done.is_multiple_of(k) && repair(&specs, &mut state).is_err() {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            record.failures += 1;
            state = snapshot;
        }
        let h_end = if cfg.track_energy && !failed {
            match hamiltonian_raw(target, &state) {
                Ok(h) => h,
                Err(e) => return Err(aborted(record, e)),
            }
        } else {
            f64::NAN
        };
        record.samples.push(state.values.clone());
        record.accepted.push(!failed);
        record.hamiltonians.push((h_start, h_end));
        record.wall_times.push(start.elapsed().as_secs_f64());
    }
    Ok(record)
}

/// SGHMC on an unconstrained parameterization (every group Euclidean).
pub fn sghmc_euclidean_sample<T: TargetModel + ?Sized>(
    target: &T,
    init: &[ParamGroup],
    cfg: &SghmcConfig,
) -> Result<ChainRecord> {
    if target
        .groups()
        .iter()
        .any(|g| g.kind != GroupKind::Euclidean)
    {
        return Err(Error::Contract(
            "sghmc_euclidean_sample needs a target with only Euclidean groups".into(),
        ));
    }
    osghmc_sample(target, init, cfg)
}

/// Noise-free variant of the oSGHMC update used as an optimizer: momentum
/// starts at zero and persists across iterations (momentum SGD on the
/// manifold). Returns the final groups.
pub fn sghmc_optimize<T: TargetModel + ?Sized>(
    target: &T,
    init: &[ParamGroup],
    eps: f64,
    alpha: f64,
    iterations: usize,
) -> Result<Vec<ParamGroup>> {
    if !(eps > 0.0) || !(0.0..1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "optimizer needs eps > 0 and alpha in [0, 1), got eps={eps} alpha={alpha}"
        )));
    }
    let specs = target.groups();
    check_groups(&specs, init)?;
    let mut state = PhaseState::from_groups(init);
    for r in state.momenta.iter_mut() {
        r.fill(0.0);
    }
    let fr = Friction {
        eps,
        alpha,
        noise_sd: 0.0,
        project_noise: true,
    };
    // No noise is drawn, so the generator is never advanced.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..iterations {
        inner_step(target, &specs, &mut state, &fr, &mut rng).map_err(|(_, e)| e)?;
    }
    Ok(state.into_groups(&specs))
}
