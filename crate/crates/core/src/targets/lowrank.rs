use std::sync::Mutex;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifold::StiefelPoint;
use crate::target::{GroupSpec, TargetModel};

/// Predictions are clipped to the centered rating scale.
pub const RATING_RANGE: (f64, f64) = (-2.0, 2.0);

/// One observed entry with its centered value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// `W = U diag(σ) Vᵀ` with column-orthonormal `U` (m×r), `V` (n×r) and
/// `σ_k = exp(log_sigma_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankModel {
    pub u: StiefelPoint,
    pub v: StiefelPoint,
    pub log_sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankGrads {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub log_sigma: Vec<f64>,
}

impl LowRankModel {
    pub fn new(u: StiefelPoint, v: StiefelPoint, log_sigma: Vec<f64>) -> Result<Self> {
        let r = u.p();
        if v.p() != r || log_sigma.len() != r {
            return Err(Error::Contract(format!(
                "rank mismatch: U has {} columns, V has {}, {} log-sigmas",
                r,
                v.p(),
                log_sigma.len()
            )));
        }
        Ok(Self { u, v, log_sigma })
    }

    /// From sampler parameters `[U, V, log σ (1×r)]`.
    pub fn from_params(params: &[DMatrix<f64>]) -> Result<Self> {
        if params.len() != 3 {
            return Err(Error::Contract(format!(
                "low-rank model takes 3 groups, got {}",
                params.len()
            )));
        }
        let u = StiefelPoint::with_tolerance(params[0].clone(), 1e-8)?;
        let v = StiefelPoint::with_tolerance(params[1].clone(), 1e-8)?;
        Self::new(u, v, params[2].iter().copied().collect())
    }

    pub fn params(&self) -> Vec<DMatrix<f64>> {
        vec![
            self.u.as_matrix().clone(),
            self.v.as_matrix().clone(),
            DMatrix::from_row_slice(1, self.rank(), &self.log_sigma),
        ]
    }

    pub fn rank(&self) -> usize {
        self.log_sigma.len()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.log_sigma.iter().map(|l| l.exp()).collect()
    }

    pub fn predict(&self, row: usize, col: usize) -> f64 {
        predict_raw(
            self.u.as_matrix(),
            self.v.as_matrix(),
            &self.sigma(),
            row,
            col,
        )
    }

    /// Same factorization with `σ` sorted decreasingly (columns of `U`, `V`
    /// permuted to match).
    pub fn sorted(&self) -> LowRankModel {
        let mut order: Vec<usize> = (0..self.rank()).collect();
        order.sort_by(|&a, &b| self.log_sigma[b].total_cmp(&self.log_sigma[a]));
        let u = self.u.as_matrix().select_columns(order.iter());
        let v = self.v.as_matrix().select_columns(order.iter());
        LowRankModel {
            u: StiefelPoint::from_trusted(u),
            v: StiefelPoint::from_trusted(v),
            log_sigma: order.iter().map(|&k| self.log_sigma[k]).collect(),
        }
    }
}

fn predict_raw(u: &DMatrix<f64>, v: &DMatrix<f64>, sigma: &[f64], row: usize, col: usize) -> f64 {
    sigma
        .iter()
        .enumerate()
        .map(|(k, s)| s * u[(row, k)] * v[(col, k)])
        .sum()
}

fn check_obs(model_shape: (usize, usize), obs: &[Rating], batch: Option<&[usize]>) -> Result<()> {
    if obs.is_empty() {
        return Err(Error::Contract("observation set is empty".into()));
    }
    if let Some(b) = batch {
        if b.is_empty() {
            return Err(Error::Contract("minibatch is empty".into()));
        }
        if let Some(&bad) = b.iter().find(|&&i| i >= obs.len()) {
            return Err(Error::Contract(format!(
                "minibatch index {bad} out of range for {} observations",
                obs.len()
            )));
        }
    }
    let (m, n) = model_shape;
    if let Some(o) = obs.iter().find(|o| o.row >= m || o.col >= n) {
        return Err(Error::Contract(format!(
            "observation ({}, {}) outside a {m}x{n} matrix",
            o.row, o.col
        )));
    }
    Ok(())
}

fn selected<'a>(
    obs: &'a [Rating],
    batch: Option<&'a [usize]>,
) -> Box<dyn Iterator<Item = &'a Rating> + 'a> {
    match batch {
        Some(b) => Box::new(b.iter().map(move |&i| &obs[i])),
        None => Box::new(obs.iter()),
    }
}

fn scale(obs: &[Rating], batch: Option<&[usize]>) -> f64 {
    batch.map_or(1.0, |b| obs.len() as f64 / b.len() as f64)
}

/// `−½ Σ (r̂ − W_ij)²` (unit observation noise, flat prior), scaled by `N/B`
/// when a minibatch of indices into `obs` is given.
pub fn lowrank_loglik(
    model: &LowRankModel,
    obs: &[Rating],
    batch: Option<&[usize]>,
) -> Result<f64> {
    check_obs((model.u.n(), model.v.n()), obs, batch)?;
    let sigma = model.sigma();
    let (u, v) = (model.u.as_matrix(), model.v.as_matrix());
    let sse: f64 = selected(obs, batch)
        .map(|o| {
            let e = o.value - predict_raw(u, v, &sigma, o.row, o.col);
            e * e
        })
        .sum();
    Ok(-0.5 * sse * scale(obs, batch))
}

/// Euclidean gradients of [`lowrank_loglik`] with respect to `U`, `V` and
/// `log σ`.
pub fn lowrank_grads(
    model: &LowRankModel,
    obs: &[Rating],
    batch: Option<&[usize]>,
) -> Result<LowRankGrads> {
    check_obs((model.u.n(), model.v.n()), obs, batch)?;
    Ok(grads_raw(
        model.u.as_matrix(),
        model.v.as_matrix(),
        &model.log_sigma,
        obs,
        batch,
    ))
}

fn grads_raw(
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    log_sigma: &[f64],
    obs: &[Rating],
    batch: Option<&[usize]>,
) -> LowRankGrads {
    let r = log_sigma.len();
    let sigma: Vec<f64> = log_sigma.iter().map(|l| l.exp()).collect();
    let mut gu = DMatrix::zeros(u.nrows(), r);
    let mut gv = DMatrix::zeros(v.nrows(), r);
    let mut gs = vec![0.0; r];
    for o in selected(obs, batch) {
        let e = o.value - predict_raw(u, v, &sigma, o.row, o.col);
        for k in 0..r {
            let uik = u[(o.row, k)];
            let vjk = v[(o.col, k)];
            gu[(o.row, k)] += e * sigma[k] * vjk;
            gv[(o.col, k)] += e * sigma[k] * uik;
            gs[k] += e * uik * vjk;
        }
    }
    let c = scale(obs, batch);
    gu *= c;
    gv *= c;
    let log_sigma_grad = gs.iter().zip(&sigma).map(|(g, s)| g * s * c).collect();
    LowRankGrads {
        u: gu,
        v: gv,
        log_sigma: log_sigma_grad,
    }
}

/// RMSE on `heldout` of the ensemble-mean prediction, clipped to
/// [`RATING_RANGE`].
pub fn predict_and_rmse(models: &[LowRankModel], heldout: &[Rating]) -> Result<f64> {
    if models.is_empty() {
        return Err(Error::Contract("ensemble needs at least one model".into()));
    }
    if heldout.is_empty() {
        return Err(Error::Contract("held-out set is empty".into()));
    }
    let sigmas: Vec<Vec<f64>> = models.iter().map(|m| m.sigma()).collect();
    let k = models.len() as f64;
    let mut sse = 0.0;
    for o in heldout {
        let mean = models
            .iter()
            .zip(&sigmas)
            .map(|(m, s)| predict_raw(m.u.as_matrix(), m.v.as_matrix(), s, o.row, o.col))
            .sum::<f64>()
            / k;
        let pred = mean.clamp(RATING_RANGE.0, RATING_RANGE.1);
        sse += (o.value - pred).powi(2);
    }
    Ok((sse / heldout.len() as f64).sqrt())
}

/// The factorization posterior as a sampler target over `[U, V, log σ]`.
/// With `batch_size` set, gradients are unbiased minibatch estimates.
#[derive(Debug)]
pub struct LowRankTarget {
    rows: usize,
    cols: usize,
    rank: usize,
    obs: Vec<Rating>,
    batch_size: Option<usize>,
    rng: Mutex<ChaCha8Rng>,
}

impl LowRankTarget {
    pub fn new(
        rows: usize,
        cols: usize,
        rank: usize,
        obs: Vec<Rating>,
        batch_size: Option<usize>,
        seed: u64,
    ) -> Result<Self> {
        if rank == 0 || rank > rows || rank > cols {
            return Err(Error::Config(format!(
                "rank {rank} invalid for a {rows}x{cols} matrix"
            )));
        }
        check_obs((rows, cols), &obs, None)?;
        if batch_size == Some(0) {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(Self {
            rows,
            cols,
            rank,
            obs,
            batch_size,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        })
    }

    pub fn observations(&self) -> &[Rating] {
        &self.obs
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn set_batch_size(&mut self, batch_size: Option<usize>) {
        self.batch_size = batch_size;
    }

    fn check(&self, params: &[DMatrix<f64>]) -> Result<()> {
        if params.len() != 3 {
            return Err(Error::Contract(format!(
                "low-rank target takes 3 groups, got {}",
                params.len()
            )));
        }
        Error::check_shape((self.rows, self.rank), params[0].shape())?;
        Error::check_shape((self.cols, self.rank), params[1].shape())?;
        Error::check_shape((1, self.rank), params[2].shape())?;
        Ok(())
    }
}

impl TargetModel for LowRankTarget {
    fn groups(&self) -> Vec<GroupSpec> {
        vec![
            GroupSpec::stiefel("U", self.rows, self.rank),
            GroupSpec::stiefel("V", self.cols, self.rank),
            GroupSpec::euclidean("log_sigma", 1, self.rank),
        ]
    }

    fn log_density(&self, params: &[DMatrix<f64>]) -> Result<f64> {
        self.check(params)?;
        let log_sigma: Vec<f64> = params[2].iter().copied().collect();
        let sigma: Vec<f64> = log_sigma.iter().map(|l| l.exp()).collect();
        let sse: f64 = self
            .obs
            .iter()
            .map(|o| (o.value - predict_raw(&params[0], &params[1], &sigma, o.row, o.col)).powi(2))
            .sum();
        Ok(-0.5 * sse)
    }

    fn grad_log_density(&self, params: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        self.check(params)?;
        let log_sigma: Vec<f64> = params[2].iter().copied().collect();
        let batch: Option<Vec<usize>> = match self.batch_size {
            Some(b) if b < self.obs.len() => {
                let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
                Some(index::sample(&mut *rng, self.obs.len(), b).into_vec())
            }
            _ => None,
        };
        let g = grads_raw(
            &params[0],
            &params[1],
            &log_sigma,
            &self.obs,
            batch.as_deref(),
        );
        Ok(vec![
            g.u,
            g.v,
            DMatrix::from_row_slice(1, self.rank, &g.log_sigma),
        ])
    }
}
