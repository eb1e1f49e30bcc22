//! Per-method summary tables in text and JSON form.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use orthohmc::diagnostics::{energy_trace, ess_series};
use orthohmc::targets::polar_map;
use orthohmc::ChainRecord;
use serde::Serialize;

use crate::config::Method;
use crate::container::{ChainMeta, LayoutKind};
use crate::error::CliError;

/// Rendered in place of a value that was not computed.
pub const ABSENT: &str = "n/a";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRow {
    pub method: String,
    /// Post-burn iterations the ESS columns are computed from.
    pub samples: usize,
    pub ess_min: Option<f64>,
    pub ess_median: Option<f64>,
    pub ess_coordinates: usize,
    /// Coordinates with zero variance, excluded from min and median.
    pub ess_degenerate: usize,
    /// Absent for stochastic-gradient methods, which have no accept step.
    pub acceptance: Option<f64>,
    pub max_abs_dh: Option<f64>,
    pub failures: u64,
    /// Nondeterministic.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeOccupancy {
    pub method: String,
    pub fractions: Vec<f64>,
    pub min_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRatios {
    pub method: String,
    /// Chain variance over oracle variance for each entry of `W = QR`.
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub method: String,
    /// Column-major entry index.
    pub entry: usize,
    /// 1 for `E[x]`, 2 for `E[x²]`.
    pub order: u32,
    pub estimate: f64,
    pub oracle: f64,
    /// Combined standard error of the difference.
    pub se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizeSummary {
    /// `"synthetic"` or the dataset path.
    pub dataset: String,
    pub n_users: usize,
    pub n_items: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub warm_start_train_rmse: f64,
    pub warm_start_test_rmse: f64,
    pub rows: Vec<EnsembleRow>,
    /// Test RMSE of the generating matrix; synthetic data only.
    pub oracle_test_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleRow {
    pub method: String,
    pub n_models: usize,
    pub ensemble_test_rmse: f64,
    pub mean_single_test_rmse: f64,
    pub ensemble_train_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub method: String,
    pub cases: usize,
    pub max_orthonormality_defect: f64,
    pub max_tangency_defect: f64,
    pub max_reversibility: f64,
    pub max_symplectic_residual: Option<f64>,
    pub max_dh_eps: f64,
    pub max_dh_half_eps: f64,
    pub dh_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub experiment: String,
    pub seed: Option<u64>,
    pub n_samples: Option<usize>,
    pub n_burn: usize,
    pub thin: Option<usize>,
    pub rows: Vec<MethodRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_occupancy: Option<Vec<ModeOccupancy>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_ratios: Option<Vec<VarianceRatios>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub haar_moments: Option<Vec<MomentRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factorize: Option<FactorizeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<Vec<AuditRow>>,
    /// JSON paths whose values vary between identical runs.
    pub nondeterministic: Vec<String>,
}

impl Summary {
    pub fn new(config_hash: &str, experiment: &str, n_burn: usize) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            experiment: experiment.to_string(),
            seed: None,
            n_samples: None,
            n_burn,
            thin: None,
            rows: Vec::new(),
            mode_occupancy: None,
            variance_ratios: None,
            haar_moments: None,
            factorize: None,
            audit: None,
            nondeterministic: vec!["rows[].wall_time_s".into()],
        }
    }

    /// Sorts rows into the fixed method order; unknown labels go last.
    pub fn sort_rows(&mut self) {
        let rank = |name: &str| {
            Method::parse(name)
                .map(|m| m as usize)
                .unwrap_or(Method::ALL.len())
        };
        self.rows.sort_by(|a, b| {
            rank(&a.method)
                .cmp(&rank(&b.method))
                .then(a.method.cmp(&b.method))
        });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    /// Table text. With `mask_timing`, wall times print as `*` so two runs
    /// of one config compare byte for byte.
    pub fn to_text(&self, mask_timing: bool) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "config_hash: {}", self.config_hash);
        let _ = writeln!(w, "experiment:  {}", self.experiment);
        if let Some(seed) = self.seed {
            let _ = writeln!(w, "seed:        {seed}");
        }
        if !self.rows.is_empty() {
            let _ = writeln!(
                w,
                "samples:     {} (burn {}, thin {})",
                opt_usize(self.n_samples),
                self.n_burn,
                opt_usize(self.thin)
            );
            let _ = writeln!(w);
            let _ = writeln!(
                w,
                "{:<16} {:>8} {:>10} {:>10} {:>9} {:>10} {:>11} {:>8} {:>10}",
                "method",
                "samples",
                "ess_min",
                "ess_med",
                "degen",
                "accept",
                "max|dH|",
                "fail",
                "time_s"
            );
            for r in &self.rows {
                let time = if mask_timing {
                    "*".to_string()
                } else {
                    format!("{:.3}", r.wall_time_s)
                };
                let _ = writeln!(
                    w,
                    "{:<16} {:>8} {:>10} {:>10} {:>9} {:>10} {:>11} {:>8} {:>10}",
                    r.method,
                    r.samples,
                    opt(r.ess_min, 1),
                    opt(r.ess_median, 1),
                    format!("{}/{}", r.ess_degenerate, r.ess_coordinates),
                    opt(r.acceptance, 3),
                    opt_exp(r.max_abs_dh),
                    r.failures,
                    time
                );
            }
        }
        if let Some(occ) = &self.mode_occupancy {
            let _ = writeln!(w, "\nmode occupancy (fraction of post-burn samples)");
            for o in occ {
                let list: Vec<String> = o.fractions.iter().map(|f| format!("{f:.3}")).collect();
                let _ = writeln!(
                    w,
                    "{:<16} min {:.4}  [{}]",
                    o.method,
                    o.min_fraction,
                    list.join(" ")
                );
            }
        }
        if let Some(vr) = &self.variance_ratios {
            let _ = writeln!(w, "\nvariance ratio to oracle (entries of W)");
            for v in vr {
                let list: Vec<String> = v.ratios.iter().map(|f| format!("{f:.3}")).collect();
                let _ = writeln!(
                    w,
                    "{:<16} min {:.3}  [{}]",
                    v.method,
                    v.min_ratio,
                    list.join(" ")
                );
            }
        }
        if let Some(rows) = &self.haar_moments {
            let _ = writeln!(w, "\nmoments against the Haar oracle (pass: |diff| < 3 se)");
            let _ = writeln!(
                w,
                "{:<8} {:>5} {:>5} {:>10} {:>10} {:>9} {:>5}",
                "method", "entry", "order", "estimate", "oracle", "se", "pass"
            );
            for m in rows {
                let _ = writeln!(
                    w,
                    "{:<8} {:>5} {:>5} {:>10.5} {:>10.5} {:>9.5} {:>5}",
                    m.method,
                    m.entry,
                    m.order,
                    m.estimate,
                    m.oracle,
                    m.se,
                    if m.pass { "yes" } else { "NO" }
                );
            }
        }
        if let Some(f) = &self.factorize {
            let _ = writeln!(
                w,
                "\nfactorization: {} ({} users, {} items, {} train, {} test)",
                f.dataset, f.n_users, f.n_items, f.n_train, f.n_test
            );
            let _ = writeln!(
                w,
                "warm start rmse: train {:.4}, test {:.4}; generating matrix test rmse {}",
                f.warm_start_train_rmse,
                f.warm_start_test_rmse,
                opt(f.oracle_test_rmse, 4)
            );
            for r in &f.rows {
                let _ = writeln!(
                    w,
                    "{:<16} models {:>3}  ensemble test {:.4}  mean single test {:.4}  ensemble train {:.4}",
                    r.method, r.n_models, r.ensemble_test_rmse, r.mean_single_test_rmse, r.ensemble_train_rmse
                );
            }
        }
        if let Some(rows) = &self.audit {
            let _ = writeln!(w, "\nintegrator audit");
            let _ = writeln!(
                w,
                "{:<8} {:>5} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>7}",
                "method",
                "cases",
                "orth",
                "tangent",
                "revers",
                "sympl",
                "dH(eps)",
                "dH(eps/2)",
                "ratio"
            );
            for a in rows {
                let _ = writeln!(
                    w,
                    "{:<8} {:>5} {:>10.2e} {:>10.2e} {:>10.2e} {:>10} {:>10.2e} {:>10.2e} {:>7.3}",
                    a.method,
                    a.cases,
                    a.max_orthonormality_defect,
                    a.max_tangency_defect,
                    a.max_reversibility,
                    opt_exp(a.max_symplectic_residual),
                    a.max_dh_eps,
                    a.max_dh_half_eps,
                    a.dh_ratio
                );
            }
        }
        out
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.digits$}"),
        _ => ABSENT.to_string(),
    }
}

fn opt_exp(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.2e}"),
        _ => ABSENT.to_string(),
    }
}

fn opt_usize(v: Option<usize>) -> String {
    v.map_or_else(|| ABSENT.to_string(), |x| x.to_string())
}

/// Scalar coordinates of one stored sample, as reported in summaries.
///
/// Unconstrained `X` groups of Euclidean methods are mapped to their polar
/// factor, `log_sigma` groups to `σ`, and the structural zeros below the
/// diagonal of triangular groups are dropped.
pub fn report_coordinates(meta: &ChainMeta, sample: &[DMatrix<f64>]) -> Vec<f64> {
    let euclidean_method = Method::parse(&meta.label).is_some_and(Method::is_euclidean);
    let mut out = Vec::new();
    for (g, m) in meta.groups.iter().zip(sample) {
        match g.kind {
            LayoutKind::UpperTriangular => {
                for j in 0..m.ncols() {
                    for i in 0..=j.min(m.nrows().saturating_sub(1)) {
                        out.push(m[(i, j)]);
                    }
                }
            }
            LayoutKind::Euclidean if g.name == "X" && euclidean_method => match polar_map(m) {
                Ok(q) => out.extend(q.iter().copied()),
                Err(_) => out.extend(m.iter().copied()),
            },
            LayoutKind::Euclidean if g.name == "log_sigma" => out.extend(m.iter().map(|v| v.exp())),
            _ => out.extend(m.iter().copied()),
        }
    }
    out
}

/// Column names matching [`report_coordinates`] entry for entry.
pub fn coordinate_names(meta: &ChainMeta) -> Vec<String> {
    let euclidean_method = Method::parse(&meta.label).is_some_and(Method::is_euclidean);
    let mut out = Vec::new();
    for g in &meta.groups {
        let name = match g.kind {
            LayoutKind::Euclidean if g.name == "X" && euclidean_method => "Q",
            LayoutKind::Euclidean if g.name == "log_sigma" => "sigma",
            _ => g.name.as_str(),
        };
        for j in 0..g.cols {
            for i in 0..g.rows {
                if g.kind != LayoutKind::UpperTriangular || i <= j {
                    out.push(format!("{name}[{i},{j}]"));
                }
            }
        }
    }
    out
}

/// Per-coordinate series of a chain under [`report_coordinates`].
pub fn coordinate_traces(meta: &ChainMeta, record: &ChainRecord) -> Vec<Vec<f64>> {
    let mut traces: Vec<Vec<f64>> = Vec::new();
    for (t, s) in record.samples.iter().enumerate() {
        let c = report_coordinates(meta, s);
        if t == 0 {
            traces = vec![Vec::with_capacity(record.len()); c.len()];
        }
        for (tr, v) in traces.iter_mut().zip(c) {
            tr.push(v);
        }
    }
    traces
}

/// Builds one summary row from a post-burn record.
pub fn method_row(meta: &ChainMeta, record: &ChainRecord) -> Result<MethodRow, CliError> {
    let stochastic = Method::parse(&meta.label).is_some_and(Method::is_stochastic);
    let traces = coordinate_traces(meta, record);
    let per = orthohmc::parallel::par_map(traces, |t| ess_series(&t));
    let mut good = Vec::new();
    let mut degenerate = 0;
    let mut coordinates = 0;
    // Series too short for an estimate leave the ESS columns absent.
    for (e, d) in per.into_iter().flatten() {
        coordinates += 1;
        if d {
            degenerate += 1;
        } else {
            good.push(e);
        }
    }
    good.sort_by(f64::total_cmp);
    let (ess_min, ess_median) = if good.is_empty() {
        (None, None)
    } else {
        let k = good.len();
        let med = if k % 2 == 1 {
            good[k / 2]
        } else {
            0.5 * (good[k / 2 - 1] + good[k / 2])
        };
        (Some(good[0]), Some(med))
    };
    let energy = energy_trace(record).ok();
    let max_abs_dh = energy
        .as_ref()
        .map(|e| e.max_abs_dh)
        .filter(|v| v.is_finite());
    let acceptance = if stochastic {
        None
    } else {
        record.acceptance_rate()
    };
    Ok(MethodRow {
        method: meta.label.clone(),
        samples: record.len(),
        ess_min,
        ess_median,
        ess_coordinates: coordinates,
        ess_degenerate: degenerate,
        acceptance,
        max_abs_dh,
        failures: record.failures,
        wall_time_s: record.total_time(),
    })
}

/// Summary of stored chains alone (the `summarize` subcommand on container
/// files): one row per chain, no experiment-specific sections.
pub fn summarize_chains(chains: &[(ChainRecord, ChainMeta)]) -> Result<Summary, CliError> {
    let first = chains
        .first()
        .ok_or_else(|| CliError::Contract("summarize needs at least one chain".into()))?;
    let hash = &first.1.config_hash;
    let mut s = Summary::new(hash, "chains", first.1.n_burn);
    for (rec, meta) in chains {
        if &meta.config_hash != hash {
            s.config_hash = "mixed".into();
        }
        s.rows.push(method_row(meta, &rec.after_burn(meta.n_burn))?);
    }
    s.sort_rows();
    Ok(s)
}

/// Fraction of samples whose `W = QR` is nearest each mode.
pub fn occupancy(modes: usize, nearest: impl Iterator<Item = usize>) -> Vec<f64> {
    let mut counts = vec![0usize; modes];
    let mut total = 0usize;
    for i in nearest {
        counts[i] += 1;
        total += 1;
    }
    counts
        .into_iter()
        .map(|c| {
            if total == 0 {
                0.0
            } else {
                c as f64 / total as f64
            }
        })
        .collect()
}

/// Sample variance of each entry across matrices.
pub fn entry_variances(samples: &[DMatrix<f64>]) -> Vec<f64> {
    let k = samples.len();
    if k < 2 {
        return Vec::new();
    }
    let (n, p) = samples[0].shape();
    let mean = samples.iter().fold(DMatrix::zeros(n, p), |a, s| a + s) / k as f64;
    let ss = samples
        .iter()
        .fold(DMatrix::zeros(n, p), |a, s| a + (s - &mean).map(|v| v * v));
    (ss / (k - 1) as f64).iter().copied().collect()
}
