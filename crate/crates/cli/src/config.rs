use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Mixture,
    MixtureStochastic,
    HaarCheck,
    Factorize,
    IntegratorAudit,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Mixture => "mixture",
            Experiment::MixtureStochastic => "mixture-stochastic",
            Experiment::HaarCheck => "haar-check",
            Experiment::Factorize => "factorize",
            Experiment::IntegratorAudit => "integrator-audit",
        }
    }
}

/// Sampling methods, declared in summary row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Hmc,
    Ghmc,
    Ohmc,
    SghmcEuclidean,
    Osghmc,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Hmc,
        Method::Ghmc,
        Method::Ohmc,
        Method::SghmcEuclidean,
        Method::Osghmc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hmc => "hmc",
            Method::Ghmc => "ghmc",
            Method::Ohmc => "ohmc",
            Method::SghmcEuclidean => "sghmc-euclidean",
            Method::Osghmc => "osghmc",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::SghmcEuclidean | Method::Osghmc)
    }

    /// Unconstrained (polar) parameterization rather than the Stiefel one.
    pub fn is_euclidean(self) -> bool {
        matches!(self, Method::Hmc | Method::SghmcEuclidean)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One method or a list of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Methods {
    One(Method),
    Many(Vec<Method>),
}

impl Methods {
    pub fn to_vec(&self) -> Vec<Method> {
        let mut v = match self {
            Methods::One(m) => vec![*m],
            Methods::Many(v) => v.clone(),
        };
        v.sort();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub eps: f64,
    /// Per-method step sizes overriding `eps`.
    pub eps_hmc: Option<f64>,
    pub eps_ghmc: Option<f64>,
    pub eps_ohmc: Option<f64>,
    pub eps_sghmc_euclidean: Option<f64>,
    pub eps_osghmc: Option<f64>,
    pub m: usize,
    pub n_samples: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub alpha: f64,
    pub beta_hat: f64,
    pub project_noise: bool,
    pub reorth_every: Option<usize>,
    /// `"projected"` or `"canonical-map"`.
    pub momentum: String,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            eps: 0.05,
            eps_hmc: None,
            eps_ghmc: None,
            eps_ohmc: None,
            eps_sghmc_euclidean: None,
            eps_osghmc: None,
            m: 20,
            n_samples: 2_000,
            n_burn: 1_000,
            thin: 1,
            alpha: 0.1,
            beta_hat: 0.0,
            project_noise: true,
            reorth_every: None,
            momentum: "projected".into(),
        }
    }
}

impl SamplerSection {
    pub fn eps_for(&self, method: Method) -> f64 {
        match method {
            Method::Hmc => self.eps_hmc,
            Method::Ghmc => self.eps_ghmc,
            Method::Ohmc => self.eps_ohmc,
            Method::SghmcEuclidean => self.eps_sghmc_euclidean,
            Method::Osghmc => self.eps_osghmc,
        }
        .unwrap_or(self.eps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSection {
    pub n: usize,
    pub p: usize,
    pub m_modes: usize,
    pub sigma: f64,
    pub sigma_noise: f64,
    pub rank: usize,
    /// MovieLens `u.data`; the synthetic generator is used when absent.
    pub dataset: Option<PathBuf>,
    pub batch_size: Option<usize>,
    pub synthetic_users: usize,
    pub synthetic_items: usize,
    pub synthetic_ratings: usize,
    pub test_fraction: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            n: 2,
            p: 2,
            m_modes: 16,
            sigma: 0.3,
            sigma_noise: 0.1,
            rank: 10,
            dataset: None,
            batch_size: Some(1_000),
            synthetic_users: 943,
            synthetic_items: 1_682,
            synthetic_ratings: 100_000,
            test_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WarmStartSection {
    pub iterations: usize,
    pub eps: f64,
    pub alpha: f64,
}

impl Default for WarmStartSection {
    fn default() -> Self {
        Self {
            iterations: 2_000,
            eps: 1e-3,
            alpha: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    pub cases: usize,
    pub steps: usize,
    pub fd_step: f64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            cases: 50,
            steps: 20,
            fd_step: 1e-5,
        }
    }
}

/// Full description of one run, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub method: Methods,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Multiplies sample, burn-in and thinning counts by [`PAPER_FACTOR`].
    #[serde(default)]
    pub paper_scale: bool,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub warm_start: WarmStartSection,
    #[serde(default)]
    pub audit: AuditSection,
}

pub const PAPER_FACTOR: usize = 10;

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub paper_scale: bool,
    pub methods: Vec<Method>,
    pub n_samples: Option<usize>,
    pub n_burn: Option<usize>,
    pub eps: Option<f64>,
    pub m: Option<usize>,
    pub dataset: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if o.paper_scale {
            self.paper_scale = true;
        }
        if !o.methods.is_empty() {
            self.method = Methods::Many(o.methods.clone());
        }
        if let Some(n) = o.n_samples {
            self.sampler.n_samples = n;
        }
        if let Some(n) = o.n_burn {
            self.sampler.n_burn = n;
        }
        if let Some(e) = o.eps {
            self.sampler.eps = e;
        }
        if let Some(m) = o.m {
            self.sampler.m = m;
        }
        if let Some(d) = &o.dataset {
            self.target.dataset = Some(d.clone());
        }
        self.validate()
    }

    pub fn methods(&self) -> Vec<Method> {
        self.method.to_vec()
    }

    fn scale(&self) -> usize {
        if self.paper_scale {
            PAPER_FACTOR
        } else {
            1
        }
    }

    pub fn n_samples(&self) -> usize {
        self.sampler.n_samples * self.scale()
    }

    pub fn n_burn(&self) -> usize {
        self.sampler.n_burn * self.scale()
    }

    pub fn thin(&self) -> usize {
        self.sampler.thin.max(1) * self.scale()
    }

    /// Number of samples left after burn-in and thinning.
    pub fn kept_samples(&self) -> usize {
        (self.n_samples() - self.n_burn()) / self.thin()
    }

    pub fn momentum_law(&self) -> Result<orthohmc::MomentumLaw, CliError> {
        match self.sampler.momentum.as_str() {
            "projected" => Ok(orthohmc::MomentumLaw::Projected),
            "canonical-map" => Ok(orthohmc::MomentumLaw::CanonicalMap),
            other => Err(CliError::Config(format!(
                "momentum must be \"projected\" or \"canonical-map\", got {other:?}"
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let methods = self.methods();
        if methods.is_empty() {
            return bad("at least one method is required".into());
        }
        let s = &self.sampler;
        if s.n_burn >= s.n_samples {
            return bad(format!(
                "n_burn ({}) must be below n_samples ({})",
                s.n_burn, s.n_samples
            ));
        }
        if s.m == 0 || s.thin == 0 {
            return bad("m and thin must be positive".into());
        }
        for m in &methods {
            let e = s.eps_for(*m);
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("eps for {m} must be positive, got {e}"));
            }
        }
        self.momentum_law()?;
        let t = &self.target;
        let allowed: &[Method] = match self.experiment {
            Experiment::Mixture => &[Method::Hmc, Method::Ghmc, Method::Ohmc, Method::Osghmc],
            Experiment::MixtureStochastic => &Method::ALL,
            Experiment::HaarCheck | Experiment::IntegratorAudit => &[Method::Ghmc, Method::Ohmc],
            Experiment::Factorize => &[Method::Osghmc, Method::Ohmc],
        };
        if let Some(m) = methods.iter().find(|m| !allowed.contains(m)) {
            return bad(format!(
                "method {m} is not available for the {:?} experiment",
                self.experiment
            ));
        }
        match self.experiment {
            Experiment::Mixture | Experiment::MixtureStochastic | Experiment::HaarCheck => {
                if t.p == 0 || t.p > t.n {
                    return bad(format!("need n >= p >= 1, got n={} p={}", t.n, t.p));
                }
                if t.m_modes == 0 || t.sigma.is_nan() || t.sigma <= 0.0 {
                    return bad("m_modes and sigma must be positive".into());
                }
                if t.sigma_noise.is_nan() || t.sigma_noise < 0.0 {
                    return bad("sigma_noise must be nonnegative".into());
                }
            }
            Experiment::Factorize => {
                if t.rank == 0 {
                    return bad("rank must be positive".into());
                }
                if !(t.test_fraction > 0.0 && t.test_fraction < 1.0) {
                    return bad("test_fraction must lie in (0, 1)".into());
                }
                if t.batch_size == Some(0) {
                    return bad("batch_size must be positive".into());
                }
            }
            Experiment::IntegratorAudit => {
                if t.p == 0 || t.p > t.n {
                    return bad(format!("need n >= p >= 1, got n={} p={}", t.n, t.p));
                }
            }
        }
        let friction_ok =
            (0.0..1.0).contains(&s.alpha) && s.beta_hat >= 0.0 && s.beta_hat < s.alpha;
        if methods.iter().any(|m| m.is_stochastic()) && !friction_ok {
            return bad(format!(
                "need 0 <= beta_hat < alpha < 1, got alpha={} beta_hat={}",
                s.alpha, s.beta_hat
            ));
        }
        Ok(())
    }

    /// Canonical TOML of the effective configuration.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML with `out_dir` blanked, hex encoded.
    /// Where the artifacts go does not change what they contain.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let digest = Sha256::digest(c.canonical_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
