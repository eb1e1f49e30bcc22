use crate::error::{Error, Result};
use crate::samplers::ChainRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySummary {
    pub proposals: usize,
    pub acceptance_rate: f64,
    /// Mean of `min(1, exp(−ΔH))` over finite proposals.
    pub expected_acceptance: f64,
    pub max_abs_dh: f64,
    pub mean_abs_dh: f64,
    /// Proposals whose energy was not finite (failed integration).
    pub non_finite: usize,
}

/// Aggregates `ΔH = H_new − H_old` and acceptance flags of a chain.
pub fn energy_trace(record: &ChainRecord) -> Result<EnergySummary> {
    if record.hamiltonians.is_empty() {
        return Err(Error::Contract("record has no proposals".into()));
    }
    if record.accepted.len() != record.hamiltonians.len() {
        return Err(Error::Contract(
            "acceptance flags and energies differ in length".into(),
        ));
    }
    let proposals = record.hamiltonians.len();
    let accepted = record.accepted.iter().filter(|&&a| a).count();
    let finite: Vec<f64> = record
        .hamiltonians
        .iter()
        .map(|(old, new)| new - old)
        .filter(|d| d.is_finite())
        .collect();
    let non_finite = proposals - finite.len();
    let (max_abs_dh, mean_abs_dh, expected_acceptance) = if finite.is_empty() {
        (f64::NAN, f64::NAN, 0.0)
    } else {
        let k = finite.len() as f64;
        (
            finite.iter().fold(0.0f64, |m, d| m.max(d.abs())),
            finite.iter().map(|d| d.abs()).sum::<f64>() / k,
            finite.iter().map(|d| (-d).exp().min(1.0)).sum::<f64>() / proposals as f64,
        )
    };
    Ok(EnergySummary {
        proposals,
        acceptance_rate: accepted as f64 / proposals as f64,
        expected_acceptance,
        max_abs_dh,
        mean_abs_dh,
        non_finite,
    })
}
