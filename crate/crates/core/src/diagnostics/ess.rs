use crate::error::{Error, Result};
use crate::parallel::par_map;
use crate::samplers::ChainRecord;

/// Effective sample sizes per coordinate with their min and median.
#[derive(Debug, Clone, PartialEq)]
pub struct EssReport {
    pub per_coordinate: Vec<f64>,
    /// `true` where the coordinate had zero variance (ESS reported as `n`).
    pub degenerate: Vec<bool>,
    pub min: f64,
    pub median: f64,
    pub n_samples: usize,
}

const MIN_LEN: usize = 10;

/// ESS of one series and whether it was degenerate.
///
/// `n / τ` with `τ = −1 + 2 Σ Γ_k`, `Γ_k = ρ̂_{2k} + ρ̂_{2k+1}`, summed while
/// positive and made monotone (Geyer's initial monotone sequence). Clipped
/// to `(0, n]`.
pub fn ess_series(x: &[f64]) -> Result<(f64, bool)> {
    let n = x.len();
    if n < MIN_LEN {
        return Err(Error::Contract(format!(
            "ESS needs at least {MIN_LEN} samples, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ESS input series"));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0 = centered.iter().map(|v| v * v).sum::<f64>() / nf;
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if c0 <= (1e-13 * scale).powi(2) {
        return Ok((nf, true));
    }
    let rho = |k: usize| -> f64 {
        centered[..n - k]
            .iter()
            .zip(&centered[k..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / nf
            / c0
    };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let gamma = if k == 0 {
            1.0 + rho(1)
        } else {
            rho(2 * k) + rho(2 * k + 1)
        };
        if gamma <= 0.0 {
            break;
        }
        let gamma = gamma.min(prev);
        sum += gamma;
        prev = gamma;
        k += 1;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / nf);
    Ok(((nf / tau).min(nf), false))
}

/// ESS per coordinate for a set of equally long traces.
pub fn ess(traces: &[Vec<f64>]) -> Result<EssReport> {
    if traces.is_empty() {
        return Err(Error::Contract("no coordinates to evaluate".into()));
    }
    let n = traces[0].len();
    if traces.iter().any(|t| t.len() != n) {
        return Err(Error::Contract("traces differ in length".into()));
    }
    let results = par_map(traces.iter().collect(), |t: &Vec<f64>| ess_series(t));
    let mut per_coordinate = Vec::with_capacity(traces.len());
    let mut degenerate = Vec::with_capacity(traces.len());
    for r in results {
        let (e, d) = r?;
        per_coordinate.push(e);
        degenerate.push(d);
    }
    let mut sorted = per_coordinate.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    Ok(EssReport {
        min: sorted[0],
        median,
        per_coordinate,
        degenerate,
        n_samples: n,
    })
}

/// ESS over every flattened entry of the (reported) sample matrices.
pub fn ess_of_record<F>(record: &ChainRecord, map: F) -> Result<EssReport>
where
    F: Fn(&[nalgebra::DMatrix<f64>]) -> Vec<nalgebra::DMatrix<f64>>,
{
    ess(&record.coordinate_traces(map))
}
