use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::HmcConfig;
use super::group::{check_groups, ParamGroup};
use super::integrator::{
    draw_momenta, eval_grad, integrate, kinetic_energy, Drift, PhaseState, StepFailure,
};
use super::record::ChainRecord;
use crate::error::{Error, Result};
use crate::target::{GroupKind, TargetModel};

fn aborted(record: ChainRecord, cause: Error) -> Error {
    Error::ChainAborted {
        record: Box::new(record),
        cause: Box::new(cause),
    }
}

/// Metropolis-corrected HMC with the given Stiefel drift.
///
/// Each iteration resamples momentum, integrates `cfg.m` leapfrog steps with a
/// shared `ε` across groups and applies one joint accept/reject test on the
/// total Hamiltonian. Rejected proposals repeat the previous state.
pub fn run_hmc<T: TargetModel + ?Sized>(
    target: &T,
    init: &[ParamGroup],
    cfg: &HmcConfig,
    drift: Drift,
) -> Result<ChainRecord> {
    cfg.validate()?;
    let specs = target.groups();
    check_groups(&specs, init)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut record = ChainRecord::with_capacity(cfg.n_samples);
    let mut current = PhaseState::from_groups(init);

    let mut logp = match target.log_density(&current.values) {
        Ok(v) if v.is_finite() => v,
        Ok(_) => return Err(aborted(record, Error::NonFinite("initial log density"))),
        Err(e) => return Err(aborted(record, e)),
    };
    let mut grads = match eval_grad(target, &specs, &current.values) {
        Ok(g) => g,
        Err(e) => return Err(aborted(record, e)),
    };

    for _ in 0..cfg.n_samples {
        let start = Instant::now();
        draw_momenta(&mut rng, &specs, &mut current, cfg.momentum);
        let u: f64 = rng.random();
        let h_old = -logp + kinetic_energy(&current.momenta);

        let mut proposal = current.clone();
        let mut proposal_grads = grads.clone();
        let outcome = integrate(
            target,
            &specs,
            &mut proposal,
            &mut proposal_grads,
            cfg.eps,
            cfg.m,
            drift,
            cfg.reorth_every,
        );

        let (h_new, new_logp) = match outcome {
            Ok(()) => match target.log_density(&proposal.values) {
                Ok(lp) => (-lp + kinetic_energy(&proposal.momenta), lp),
                Err(e) => return Err(aborted(record, e)),
            },
            Err(StepFailure::Integrator(_)) => {
                record.failures += 1;
                (f64::NAN, f64::NAN)
            }
            Err(StepFailure::Target(e)) => return Err(aborted(record, e)),
        };

        // NaN compares false: non-finite proposals are rejected.
        let accept = h_new.is_finite() && u < (h_old - h_new).exp().min(1.0);
        if accept {
            current = proposal;
            grads = proposal_grads;
            logp = new_logp;
        }
        record.samples.push(current.values.clone());
        record.accepted.push(accept);
        record.hamiltonians.push((h_old, h_new));
        record.wall_times.push(start.elapsed().as_secs_f64());
    }
    Ok(record)
}

/// oHMC: Cayley retraction with simultaneous vector transport.
pub fn ohmc_sample<T: TargetModel + ?Sized>(
    target: &T,
    init: &[ParamGroup],
    cfg: &HmcConfig,
) -> Result<ChainRecord> {
    run_hmc(target, init, cfg, Drift::Cayley)
}

/// Geodesic HMC: exact geodesic flow with parallel transport. Matrix
/// exponential failures are counted in `failures` and rejected.
pub fn ghmc_sample<T: TargetModel + ?Sized>(
    target: &T,
    init: &[ParamGroup],
    cfg: &HmcConfig,
) -> Result<ChainRecord> {
    run_hmc(target, init, cfg, Drift::Geodesic)
}

/// Standard HMC (identity mass) for targets whose groups are all Euclidean.
pub fn hmc_euclidean_sample<T: TargetModel + ?Sized>(
    target: &T,
    init: &[ParamGroup],
    cfg: &HmcConfig,
) -> Result<ChainRecord> {
    if target
        .groups()
        .iter()
        .any(|g| g.kind != GroupKind::Euclidean)
    {
        return Err(Error::Contract(
            "hmc_euclidean_sample needs a target with only Euclidean groups".into(),
        ));
    }
    run_hmc(target, init, cfg, Drift::Cayley)
}
