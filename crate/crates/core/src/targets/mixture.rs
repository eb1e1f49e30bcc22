use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};

use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, mask_upper, qr_signed};
use crate::manifold::StiefelPoint;
use crate::target::{GroupSpec, TargetModel};

/// `π(Q, R) = Σᵢ πᵢ 𝒩(QR | Mᵢ, σ²I)` over an `n×p` frame `Q` and an
/// upper-triangular `p×p` factor `R`. No change-of-variables term is
/// included: the density is taken directly on `(Q, R)`.
#[derive(Debug, Clone)]
pub struct MatrixMixtureTarget {
    modes: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    sigma: f64,
    n: usize,
    p: usize,
}

/// A point of the QR parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct QrState {
    pub q: StiefelPoint,
    pub r: DMatrix<f64>,
}

impl QrState {
    pub fn new(q: StiefelPoint, mut r: DMatrix<f64>) -> Result<Self> {
        let p = q.p();
        Error::check_shape((p, p), r.shape())?;
        for j in 0..p {
            for i in (j + 1)..p {
                if r[(i, j)] != 0.0 {
                    return Err(Error::Contract("R must be upper-triangular".into()));
                }
            }
        }
        mask_upper(&mut r);
        Ok(Self { q, r })
    }

    /// Sign-normalized QR factorization of `w`; works for rank-deficient `w`.
    pub fn from_matrix(w: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = w.shape();
        if p == 0 || p > n {
            return Err(Error::Shape {
                rows: n,
                cols: p,
                reason: "QR state needs n >= p >= 1",
            });
        }
        let (q, mut r) = qr_signed(w);
        mask_upper(&mut r);
        Ok(Self {
            q: StiefelPoint::new(q)?,
            r,
        })
    }

    pub fn product(&self) -> DMatrix<f64> {
        self.q.as_matrix() * &self.r
    }

    pub fn params(&self) -> Vec<DMatrix<f64>> {
        vec![self.q.as_matrix().clone(), self.r.clone()]
    }
}

impl MatrixMixtureTarget {
    pub fn new(modes: Vec<DMatrix<f64>>, weights: Vec<f64>, sigma: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Config("mixture needs at least one mode".into()));
        }
        if modes.len() != weights.len() {
            return Err(Error::Config(format!(
                "{} modes but {} weights",
                modes.len(),
                weights.len()
            )));
        }
        let (n, p) = modes[0].shape();
        if p == 0 || p > n {
            return Err(Error::Shape {
                rows: n,
                cols: p,
                reason: "modes must satisfy n >= p >= 1",
            });
        }
        for m in &modes {
            Error::check_shape((n, p), m.shape())?;
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            modes,
            weights,
            log_weights,
            sigma,
            n,
            p,
        })
    }

    /// The grid of modes whose entries are each 1 or 2, in binary order over the
    /// column-major entries (mode 0 is all ones), truncated to `m` modes and
    /// equally weighted.
    pub fn grid(n: usize, p: usize, m: usize, sigma: f64) -> Result<Self> {
        let cells = n * p;
        if cells < usize::BITS as usize && m > (1usize << cells) {
            return Err(Error::Config(format!(
                "only {} distinct 1/2 modes exist for {n}x{p}",
                1usize << cells
            )));
        }
        let modes = (0..m)
            .map(|i| DMatrix::from_fn(n, p, |r, c| 1.0 + ((i >> (c * n + r)) & 1) as f64))
            .collect();
        Self::new(modes, vec![1.0 / m as f64; m], sigma)
    }

    pub fn modes(&self) -> &[DMatrix<f64>] {
        &self.modes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.p)
    }

    /// Index of the mode closest (Frobenius) to `w`.
    pub fn nearest_mode(&self, w: &DMatrix<f64>) -> usize {
        self.modes
            .iter()
            .enumerate()
            .map(|(i, m)| (i, (m - w).norm_squared()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    fn normalizer(&self) -> f64 {
        -((self.n * self.p) as f64) * (self.sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
    }

    /// Per-mode log terms `log πᵢ + log 𝒩(W | Mᵢ, σ²I)`.
    fn log_terms(&self, w: &DMatrix<f64>) -> Vec<f64> {
        let c = self.normalizer();
        let inv = 0.5 / (self.sigma * self.sigma);
        self.modes
            .iter()
            .zip(&self.log_weights)
            .map(|(m, lw)| lw + c - (w - m).norm_squared() * inv)
            .collect()
    }

    fn logpdf_product(&self, w: &DMatrix<f64>) -> f64 {
        log_sum_exp(&self.log_terms(w))
    }

    /// `∂ log π / ∂W` at `W = QR`.
    fn grad_product(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let terms = self.log_terms(w);
        let lse = log_sum_exp(&terms);
        let mut g = DMatrix::zeros(self.n, self.p);
        for (m, t) in self.modes.iter().zip(&terms) {
            let resp = (t - lse).exp();
            if resp > 0.0 {
                g += (m - w) * resp;
            }
        }
        g / (self.sigma * self.sigma)
    }

    fn split<'a>(
        &self,
        params: &'a [DMatrix<f64>],
    ) -> Result<(&'a DMatrix<f64>, &'a DMatrix<f64>)> {
        if params.len() != 2 {
            return Err(Error::Contract(format!(
                "mixture target takes 2 groups, got {}",
                params.len()
            )));
        }
        Error::check_shape((self.n, self.p), params[0].shape())?;
        Error::check_shape((self.p, self.p), params[1].shape())?;
        Ok((&params[0], &params[1]))
    }

    pub(crate) fn grads_from(
        &self,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let w = q * r;
        let gw = self.grad_product(&w);
        let gq = &gw * r.transpose();
        let mut gr = q.tr_mul(&gw);
        mask_upper(&mut gr);
        (gq, gr)
    }

    pub(crate) fn logpdf_from(&self, q: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
        self.logpdf_product(&(q * r))
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn mixture_logpdf(target: &MatrixMixtureTarget, state: &QrState) -> Result<f64> {
    Error::check_shape(target.shape(), state.q.shape())?;
    Ok(target.logpdf_from(state.q.as_matrix(), &state.r))
}

/// Euclidean gradients `(∂/∂Q, ∂/∂R)`, the latter masked to the upper triangle.
pub fn mixture_grads(
    target: &MatrixMixtureTarget,
    state: &QrState,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    Error::check_shape(target.shape(), state.q.shape())?;
    Ok(target.grads_from(state.q.as_matrix(), &state.r))
}

/// Exact draws: pick a mode, add Gaussian noise, factor with `diag(R) ≥ 0`.
pub fn true_sample_oracle(
    target: &MatrixMixtureTarget,
    count: usize,
    seed: u64,
) -> Result<Vec<QrState>> {
    Ok(oracle_with_modes(target, count, seed)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

pub fn oracle_with_modes(
    target: &MatrixMixtureTarget,
    count: usize,
    seed: u64,
) -> Result<Vec<(QrState, usize)>> {
    if count == 0 {
        return Err(Error::Contract("oracle count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = WeightedIndex::new(&target.weights)
        .map_err(|e| Error::Config(format!("mixture weights: {e}")))?;
    let (n, p) = target.shape();
    (0..count)
        .map(|_| {
            let i = pick.sample(&mut rng);
            let w = &target.modes[i] + gaussian_matrix(&mut rng, n, p) * target.sigma;
            Ok((QrState::from_matrix(&w)?, i))
        })
        .collect()
}

impl TargetModel for MatrixMixtureTarget {
    fn groups(&self) -> Vec<GroupSpec> {
        vec![
            GroupSpec::stiefel("Q", self.n, self.p),
            GroupSpec::upper_triangular("R", self.p),
        ]
    }

    fn log_density(&self, params: &[DMatrix<f64>]) -> Result<f64> {
        let (q, r) = self.split(params)?;
        Ok(self.logpdf_from(q, r))
    }

    fn grad_log_density(&self, params: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        let (q, r) = self.split(params)?;
        let (gq, gr) = self.grads_from(q, r);
        Ok(vec![gq, gr])
    }
}
