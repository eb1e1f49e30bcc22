//! Experiment pipelines and their on-disk artifacts.
//!
//! Each run writes into `<out_dir>/<experiment>-<hash prefix>/`:
//! `config.toml`, `chains/<method>.chain`, `plots/*.csv`, `summary.txt` and
//! `summary.json`. Methods run in parallel; each owns its seeds and files.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use orthohmc::diagnostics::{reversibility_check_with, symplecticity_check_with};
use orthohmc::samplers::{leapfrog_step, resample_momentum, sghmc_optimize};
use orthohmc::targets::{oracle_with_modes, polar_map, polar_target, predict_and_rmse};
use orthohmc::{
    ghmc_sample, hamiltonian, hmc_euclidean_sample, init_groups, ohmc_sample, osghmc_sample,
    sample_tangent_gaussian, sghmc_euclidean_sample, ChainRecord, Drift, HmcConfig, LowRankModel,
    LowRankTarget, MatrixMixtureTarget, NoisyGradientWrapper, ParamGroup, QrState, SghmcConfig,
    StiefelPoint, TargetModel, UniformStiefel,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, ExperimentConfig, Method};
use crate::container::{export_chain, ChainMeta, GroupLayout};
use crate::error::CliError;
use crate::movielens::{load_movielens, synthetic_scale, RatingsDataset};
use crate::plot;
use crate::summary::{
    coordinate_names, entry_variances, method_row, occupancy, AuditRow, EnsembleRow,
    FactorizeSummary, ModeOccupancy, MomentRow, Summary, VarianceRatios,
};

/// Hex digits of the config hash used in run directory names.
pub const HASH_PREFIX: usize = 12;

/// A finished run.
#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub summary: Summary,
    /// Full chains (after burn-in and thinning for `factorize`) per method.
    pub chains: Vec<(ChainRecord, ChainMeta)>,
}

pub fn run_dir(cfg: &ExperimentConfig) -> PathBuf {
    let hash = cfg.hash();
    cfg.out_dir.join(format!(
        "{}-{}",
        cfg.experiment.name(),
        &hash[..HASH_PREFIX]
    ))
}

/// Independent stream per method and purpose.
pub fn derive_seed(base: u64, method: Option<Method>, salt: u64) -> u64 {
    let m = method.map_or(0, |m| m as u64 + 1);
    let mut z =
        base ^ m.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SALT_CHAIN: u64 = 1;
const SALT_NOISE: u64 = 2;
const SALT_ORACLE: u64 = 3;
const SALT_INIT: u64 = 4;
const SALT_DATA: u64 = 5;
const SALT_BATCH: u64 = 6;
const SALT_AUDIT: u64 = 7;

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Runs one sampler on `target` with the config's sampler settings.
pub fn sample_method(
    cfg: &ExperimentConfig,
    method: Method,
    target: &dyn TargetModel,
    init: &[ParamGroup],
) -> Result<ChainRecord, CliError> {
    let s = &cfg.sampler;
    let eps = s.eps_for(method);
    let seed = derive_seed(cfg.seed, Some(method), SALT_CHAIN);
    let law = cfg.momentum_law()?;
    let record = if method.is_stochastic() {
        let mut c = SghmcConfig::new(eps, s.alpha, s.m, cfg.n_samples(), cfg.n_burn(), seed);
        c.beta_hat = s.beta_hat;
        c.project_noise = s.project_noise;
        c.momentum = law;
        c.reorth_every = s.reorth_every;
        match method {
            Method::Osghmc => osghmc_sample(target, init, &c)?,
            _ => sghmc_euclidean_sample(target, init, &c)?,
        }
    } else {
        let mut c = HmcConfig::new(eps, s.m, cfg.n_samples(), cfg.n_burn(), seed);
        c.momentum = law;
        c.reorth_every = s.reorth_every;
        match method {
            Method::Ohmc => ohmc_sample(target, init, &c)?,
            Method::Ghmc => ghmc_sample(target, init, &c)?,
            _ => hmc_euclidean_sample(target, init, &c)?,
        }
    };
    Ok(record)
}

fn meta_for(
    cfg: &ExperimentConfig,
    method: Method,
    target: &dyn TargetModel,
    n_burn: usize,
) -> ChainMeta {
    ChainMeta {
        config_hash: cfg.hash(),
        label: method.name().to_string(),
        n_burn,
        groups: target.groups().iter().map(GroupLayout::from_spec).collect(),
    }
}

/// Runs the configured experiment and writes its artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let dir = run_dir(cfg);
    create_dir(&dir.join("chains"))?;
    create_dir(&dir.join("plots"))?;
    let hash = cfg.hash();
    write_text(
        &dir.join("config.toml"),
        &format!("# config_hash={hash}\n{}", cfg.canonical_toml()),
    )?;

    let (mut summary, chains) = match cfg.experiment {
        Experiment::Mixture | Experiment::MixtureStochastic => mixture(cfg, &dir)?,
        Experiment::HaarCheck => haar_check(cfg, &dir)?,
        Experiment::Factorize => factorize(cfg, &dir)?,
        Experiment::IntegratorAudit => (integrator_audit(cfg)?, Vec::new()),
    };
    summary.seed = Some(cfg.seed);
    summary.n_samples = Some(cfg.n_samples());
    summary.thin = Some(cfg.thin());
    summary.sort_rows();

    for (rec, meta) in &chains {
        export_chain(
            rec,
            meta,
            &dir.join("chains").join(format!("{}.chain", meta.label)),
        )?;
    }
    write_text(&dir.join("summary.txt"), &summary.to_text(false))?;
    write_text(&dir.join("summary.json"), &summary.to_json())?;
    Ok(RunOutput {
        dir,
        summary,
        chains,
    })
}

fn kept(cfg: &ExperimentConfig, record: &ChainRecord) -> ChainRecord {
    record.after_burn(cfg.n_burn()).thinned(cfg.thin())
}

/// `W = QR` of a stored mixture sample (polar factor for `X`).
fn product_of(method: Method, sample: &[DMatrix<f64>]) -> DMatrix<f64> {
    let q = if method.is_euclidean() {
        polar_map(&sample[0]).unwrap_or_else(|_| sample[0].clone())
    } else {
        sample[0].clone()
    };
    q * &sample[1]
}

type Chains = Vec<(ChainRecord, ChainMeta)>;

/// One chain on the mixture grid from `start`. Euclidean methods sample the
/// polar parameterization. In `mixture-stochastic` runs the stochastic methods
/// see gradients with added noise.
pub fn mixture_chain(
    cfg: &ExperimentConfig,
    target: &MatrixMixtureTarget,
    start: &QrState,
    method: Method,
) -> Result<(ChainRecord, ChainMeta), CliError> {
    let t = &cfg.target;
    let noise_seed = derive_seed(cfg.seed, Some(method), SALT_NOISE);
    let noisy = cfg.experiment == Experiment::MixtureStochastic
        && method.is_stochastic()
        && t.sigma_noise > 0.0;
    if method.is_euclidean() {
        let polar = polar_target(target.clone());
        let init = init_groups(&polar, start.params())?;
        let meta = meta_for(cfg, method, &polar, cfg.n_burn());
        let rec = if noisy {
            let wrapped = NoisyGradientWrapper::new(&polar, t.sigma_noise, noise_seed)?;
            sample_method(cfg, method, &wrapped, &init)?
        } else {
            sample_method(cfg, method, &polar, &init)?
        };
        Ok((rec, meta))
    } else {
        let init = init_groups(target, start.params())?;
        let meta = meta_for(cfg, method, target, cfg.n_burn());
        let rec = if noisy {
            let wrapped = NoisyGradientWrapper::new(target, t.sigma_noise, noise_seed)?;
            sample_method(cfg, method, &wrapped, &init)?
        } else {
            sample_method(cfg, method, target, &init)?
        };
        Ok((rec, meta))
    }
}

fn mixture(cfg: &ExperimentConfig, dir: &Path) -> Result<(Summary, Chains), CliError> {
    let t = &cfg.target;
    let target = MatrixMixtureTarget::grid(t.n, t.p, t.m_modes, t.sigma)?;
    let start = QrState::from_matrix(&target.modes()[0])?;

    let results = orthohmc::parallel::par_map(cfg.methods(), |method| {
        let (record, meta) = mixture_chain(cfg, &target, &start, method)?;
        Ok::<_, CliError>((method, record, meta))
    });

    let mut summary = Summary::new(&cfg.hash(), cfg.experiment.name(), cfg.n_burn());
    let mut occupancies = Vec::new();
    let mut ratios = Vec::new();
    let mut chains = Vec::new();

    let post_burn_len = cfg.n_samples() - cfg.n_burn();
    let oracle = oracle_with_modes(
        &target,
        post_burn_len.max(10_000),
        derive_seed(cfg.seed, None, SALT_ORACLE),
    )?;
    let oracle_w: Vec<DMatrix<f64>> = oracle.iter().map(|(s, _)| s.product()).collect();
    let oracle_var = entry_variances(&oracle_w);

    for r in results {
        let (method, record, meta) = r?;
        let post = record.after_burn(cfg.n_burn());
        summary.rows.push(method_row(&meta, &post)?);
        let ws: Vec<DMatrix<f64>> = post.samples.iter().map(|s| product_of(method, s)).collect();
        if t.m_modes > 1 {
            let fractions = occupancy(t.m_modes, ws.iter().map(|w| target.nearest_mode(w)));
            let min_fraction = fractions.iter().copied().fold(f64::INFINITY, f64::min);
            occupancies.push(ModeOccupancy {
                method: method.name().into(),
                fractions,
                min_fraction,
            });
        }
        let ratio: Vec<f64> = entry_variances(&ws)
            .iter()
            .zip(&oracle_var)
            .map(|(a, b)| a / b)
            .collect();
        let min_ratio = ratio.iter().copied().fold(f64::INFINITY, f64::min);
        ratios.push(VarianceRatios {
            method: method.name().into(),
            ratios: ratio,
            min_ratio,
        });
        plot::write_samples_csv(
            &dir.join("plots").join(format!("{}.csv", method.name())),
            &meta,
            &kept(cfg, &record),
        )?;
        chains.push((record, meta));
    }

    // Oracle plot data with the same row count as each method's file.
    let names = coordinate_names(&meta_for(cfg, Method::Ohmc, &target, 0));
    let draws: Vec<(Vec<f64>, usize)> = oracle
        .iter()
        .take(cfg.kept_samples())
        .map(|(s, mode)| (plot::qr_coordinates(s.q.as_matrix(), &s.r), *mode))
        .collect();
    plot::write_oracle_csv(
        &dir.join("plots").join("oracle.csv"),
        &cfg.hash(),
        &names,
        &draws,
    )?;

    if !occupancies.is_empty() {
        summary.mode_occupancy = Some(occupancies);
    }
    summary.variance_ratios = Some(ratios);
    Ok((summary, chains))
}

/// Means of `f(x)` over consecutive batches of each entry.
fn batch_means(samples: &[DMatrix<f64>], batches: usize, f: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
    let len = samples.len() / batches;
    (0..batches)
        .map(|b| {
            let chunk = &samples[b * len..(b + 1) * len];
            let (n, p) = chunk[0].shape();
            let sum = chunk
                .iter()
                .fold(DMatrix::zeros(n, p), |acc, s| acc + s.map(&f));
            (sum / len as f64).iter().copied().collect()
        })
        .collect()
}

/// Grand mean and standard error of each entry from batch means.
fn mean_and_se(means: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let k = means.len() as f64;
    (0..means[0].len())
        .map(|i| {
            let grand = means.iter().map(|m| m[i]).sum::<f64>() / k;
            let var = means.iter().map(|m| (m[i] - grand).powi(2)).sum::<f64>() / (k - 1.0);
            (grand, (var / k).sqrt())
        })
        .collect()
}

const BATCHES: usize = 40;

fn haar_check(cfg: &ExperimentConfig, dir: &Path) -> Result<(Summary, Chains), CliError> {
    let (n, p) = (cfg.target.n, cfg.target.p);
    let target = UniformStiefel::new(n, p);
    let post_len = cfg.n_samples() - cfg.n_burn();
    if post_len < 2 * BATCHES {
        return Err(CliError::Config(format!(
            "haar-check needs at least {} post-burn samples",
            2 * BATCHES
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, None, SALT_ORACLE));
    let oracle: Vec<DMatrix<f64>> = (0..post_len)
        .map(|_| StiefelPoint::random(&mut rng, n, p).map(StiefelPoint::into_matrix))
        .collect::<Result<_, _>>()?;
    let oracle_stats = [
        mean_and_se(&batch_means(&oracle, BATCHES, |v| v)),
        mean_and_se(&batch_means(&oracle, BATCHES, |v| v * v)),
    ];

    let results = orthohmc::parallel::par_map(cfg.methods(), |method| {
        let mut r = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Some(method), SALT_INIT));
        let x0 = StiefelPoint::random(&mut r, n, p)?;
        let init = init_groups(&target, vec![x0.into_matrix()])?;
        let rec = sample_method(cfg, method, &target, &init)?;
        Ok::<_, CliError>((method, rec))
    });

    let mut summary = Summary::new(&cfg.hash(), cfg.experiment.name(), cfg.n_burn());
    let mut moments = Vec::new();
    let mut chains = Vec::new();
    for r in results {
        let (method, record) = r?;
        let meta = meta_for(cfg, method, &target, cfg.n_burn());
        let post = record.after_burn(cfg.n_burn());
        summary.rows.push(method_row(&meta, &post)?);
        let xs: Vec<DMatrix<f64>> = post.samples.iter().map(|s| s[0].clone()).collect();
        let chain_stats = [
            mean_and_se(&batch_means(&xs, BATCHES, |v| v)),
            mean_and_se(&batch_means(&xs, BATCHES, |v| v * v)),
        ];
        for (order, (c, o)) in chain_stats.iter().zip(&oracle_stats).enumerate() {
            for (entry, ((cm, cse), (om, ose))) in c.iter().zip(o).enumerate() {
                let se = (cse * cse + ose * ose).sqrt();
                moments.push(MomentRow {
                    method: method.name().into(),
                    entry,
                    order: order as u32 + 1,
                    estimate: *cm,
                    oracle: *om,
                    se,
                    pass: (cm - om).abs() < 3.0 * se,
                });
            }
        }
        plot::write_samples_csv(
            &dir.join("plots").join(format!("{}.csv", method.name())),
            &meta,
            &kept(cfg, &record),
        )?;
        chains.push((record, meta));
    }
    summary.haar_moments = Some(moments);
    Ok((summary, chains))
}

/// Train/test ratings, matrix shape, label and (synthetic only) the
/// generating model.
struct FactorData {
    train: Vec<orthohmc::Rating>,
    test: Vec<orthohmc::Rating>,
    users: usize,
    items: usize,
    label: String,
    truth: Option<LowRankModel>,
}

fn factor_data(cfg: &ExperimentConfig) -> Result<FactorData, CliError> {
    let t = &cfg.target;
    let (data, label, truth) = match &t.dataset {
        Some(path) => (load_movielens(path)?, path.display().to_string(), None),
        None => {
            let (data, truth) = RatingsDataset::synthetic_with_truth(
                t.synthetic_users,
                t.synthetic_items,
                t.synthetic_ratings,
                t.rank,
                derive_seed(cfg.seed, None, SALT_DATA),
            )?;
            let complete =
                data.n_users() == t.synthetic_users && data.n_items() == t.synthetic_items;
            (data, "synthetic".to_string(), complete.then_some(truth))
        }
    };
    if t.rank > data.n_users().min(data.n_items()) {
        return Err(CliError::Config(format!(
            "rank {} exceeds the {}x{} rating matrix",
            t.rank,
            data.n_users(),
            data.n_items()
        )));
    }
    let (train, test) = data.split(
        t.test_fraction,
        derive_seed(cfg.seed, None, SALT_DATA + 100),
    );
    if train.is_empty() || test.is_empty() {
        return Err(CliError::Contract(
            "train/test split left an empty side".into(),
        ));
    }
    Ok(FactorData {
        train,
        test,
        users: data.n_users(),
        items: data.n_items(),
        label,
        truth,
    })
}

fn factorize(cfg: &ExperimentConfig, dir: &Path) -> Result<(Summary, Chains), CliError> {
    let t = &cfg.target;
    let data = factor_data(cfg)?;
    let minibatch = LowRankTarget::new(
        data.users,
        data.items,
        t.rank,
        data.train.clone(),
        t.batch_size,
        derive_seed(cfg.seed, None, SALT_BATCH),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, None, SALT_INIT));
    let init_scale = 0.1 * synthetic_scale(data.users, data.items, t.rank);
    let init = LowRankModel::new(
        StiefelPoint::random(&mut rng, data.users, t.rank)?,
        StiefelPoint::random(&mut rng, data.items, t.rank)?,
        vec![init_scale.ln(); t.rank],
    )?;
    let w = &cfg.warm_start;
    let start = init_groups(&minibatch, init.params())?;
    let warm = if w.iterations > 0 {
        sghmc_optimize(&minibatch, &start, w.eps, w.alpha, w.iterations)?
    } else {
        start
    };
    let warm_model = model_of(&warm)?;
    let warm_train = predict_and_rmse(std::slice::from_ref(&warm_model), &data.train)?;
    let warm_test = predict_and_rmse(std::slice::from_ref(&warm_model), &data.test)?;

    let results = orthohmc::parallel::par_map(cfg.methods(), |method| {
        let rec = if method.is_stochastic() {
            sample_method(cfg, method, &minibatch, &warm)?
        } else {
            let full =
                LowRankTarget::new(data.users, data.items, t.rank, data.train.clone(), None, 0)?;
            sample_method(cfg, method, &full, &warm)?
        };
        Ok::<_, CliError>((method, rec))
    });

    let mut summary = Summary::new(&cfg.hash(), cfg.experiment.name(), cfg.n_burn());
    let mut ensemble_rows = Vec::new();
    let mut chains = Vec::new();
    for r in results {
        let (method, record) = r?;
        let full_meta = meta_for(cfg, method, &minibatch, cfg.n_burn());
        summary
            .rows
            .push(method_row(&full_meta, &record.after_burn(cfg.n_burn()))?);
        let kept_rec = kept(cfg, &record);
        let models: Vec<LowRankModel> = kept_rec
            .samples
            .iter()
            .map(|s| LowRankModel::from_params(s))
            .collect::<Result<_, _>>()?;
        if models.is_empty() {
            return Err(CliError::Config(
                "burn-in and thinning leave no models for the ensemble".into(),
            ));
        }
        let singles: Vec<f64> = models
            .iter()
            .map(|m| predict_and_rmse(std::slice::from_ref(m), &data.test))
            .collect::<Result<_, _>>()?;
        let running: Vec<f64> = (1..=models.len())
            .map(|k| predict_and_rmse(&models[..k], &data.test))
            .collect::<Result<_, _>>()?;
        ensemble_rows.push(EnsembleRow {
            method: method.name().into(),
            n_models: models.len(),
            ensemble_test_rmse: *running.last().expect("nonempty"),
            mean_single_test_rmse: singles.iter().sum::<f64>() / singles.len() as f64,
            ensemble_train_rmse: predict_and_rmse(&models, &data.train)?,
        });
        plot::write_rmse_csv(
            &dir.join("plots")
                .join(format!("rmse-{}.csv", method.name())),
            &cfg.hash(),
            &singles,
            &running,
        )?;
        // Only the singular values are plotted; the factors have thousands of
        // entries each.
        let sigma_meta = ChainMeta {
            groups: vec![full_meta.groups[2].clone()],
            ..full_meta.clone()
        };
        let sigma_rec = ChainRecord {
            samples: kept_rec
                .samples
                .iter()
                .map(|s| vec![s[2].clone()])
                .collect(),
            ..kept_rec.clone()
        };
        plot::write_samples_csv(
            &dir.join("plots").join(format!("{}.csv", method.name())),
            &sigma_meta,
            &sigma_rec,
        )?;
        // The stored chain is the thinned one: full factor chains run to
        // hundreds of megabytes.
        chains.push((
            kept_rec,
            ChainMeta {
                n_burn: 0,
                ..full_meta
            },
        ));
    }
    summary.factorize = Some(FactorizeSummary {
        dataset: data.label,
        n_users: data.users,
        n_items: data.items,
        n_train: data.train.len(),
        n_test: data.test.len(),
        warm_start_train_rmse: warm_train,
        warm_start_test_rmse: warm_test,
        rows: ensemble_rows,
        oracle_test_rmse: data
            .truth
            .as_ref()
            .map(|m| predict_and_rmse(std::slice::from_ref(m), &data.test))
            .transpose()?,
    });
    Ok((summary, chains))
}

fn model_of(groups: &[ParamGroup]) -> Result<LowRankModel, CliError> {
    let params: Vec<DMatrix<f64>> = groups.iter().map(|g| g.value.clone()).collect();
    Ok(LowRankModel::from_params(&params)?)
}

fn drift_of(method: Method) -> Drift {
    match method {
        Method::Ghmc => Drift::Geodesic,
        _ => Drift::Cayley,
    }
}

/// Largest `|H − H₀|` along `steps` leapfrog steps, with the largest
/// orthonormality and tangency defects seen.
pub fn trajectory_energy_error(
    target: &dyn TargetModel,
    start: &[ParamGroup],
    eps: f64,
    steps: usize,
    drift: Drift,
) -> Result<(f64, f64, f64), CliError> {
    let h0 = hamiltonian(target, start)?;
    let mut cur = start.to_vec();
    let (mut dh, mut orth, mut tan) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..steps {
        cur = leapfrog_step(target, &cur, eps, drift)?;
        dh = dh.max((hamiltonian(target, &cur)? - h0).abs());
        for g in &cur {
            orth = orth.max(g.orthonormality_defect());
            tan = tan.max(g.tangency_defect());
        }
    }
    Ok((dh, orth, tan))
}

fn integrator_audit(cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    let t = &cfg.target;
    let a = &cfg.audit;
    let mixture = MatrixMixtureTarget::grid(t.n, t.p, t.m_modes, t.sigma)?;
    let uniform = UniformStiefel::new(t.n, t.p);
    let specs = mixture.groups();
    let cases = a.cases.max(1);

    let rows = orthohmc::parallel::par_map(cfg.methods(), |method| {
        let eps = cfg.sampler.eps_for(method);
        let drift = drift_of(method);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Some(method), SALT_AUDIT));
        let mut row = AuditRow {
            method: method.name().into(),
            cases,
            max_orthonormality_defect: 0.0,
            max_tangency_defect: 0.0,
            max_reversibility: 0.0,
            max_symplectic_residual: None,
            max_dh_eps: 0.0,
            max_dh_half_eps: 0.0,
            dh_ratio: f64::NAN,
        };
        for case in 0..cases {
            let mode = &mixture.modes()[case % mixture.modes().len()];
            let w = mode + orthohmc::linalg::gaussian_matrix(&mut rng, t.n, t.p) * t.sigma;
            let mut groups = init_groups(&mixture, QrState::from_matrix(&w)?.params())?;
            resample_momentum(&mut rng, &specs, &mut groups, cfg.momentum_law()?);

            let (dh, orth, tan) = trajectory_energy_error(&mixture, &groups, eps, a.steps, drift)?;
            let (dh2, orth2, tan2) =
                trajectory_energy_error(&mixture, &groups, 0.5 * eps, 2 * a.steps, drift)?;
            row.max_dh_eps = row.max_dh_eps.max(dh);
            row.max_dh_half_eps = row.max_dh_half_eps.max(dh2);
            row.max_orthonormality_defect = row.max_orthonormality_defect.max(orth).max(orth2);
            row.max_tangency_defect = row.max_tangency_defect.max(tan).max(tan2);
            row.max_reversibility = row.max_reversibility.max(reversibility_check_with(
                &mixture, &groups, eps, a.steps, drift,
            )?);

            let x = StiefelPoint::random(&mut rng, t.n, t.p)?;
            let state =
                sample_tangent_gaussian(&x, derive_seed(cfg.seed, Some(method), case as u64));
            match symplecticity_check_with(&uniform, &state, eps, a.fd_step, drift) {
                Ok(res) => {
                    row.max_symplectic_residual =
                        Some(row.max_symplectic_residual.map_or(res, |m: f64| m.max(res)));
                }
                Err(orthohmc::Error::Resolution { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        row.dh_ratio = row.max_dh_eps / row.max_dh_half_eps;
        Ok::<_, CliError>(row)
    });

    let mut summary = Summary::new(&cfg.hash(), cfg.experiment.name(), cfg.n_burn());
    summary.audit = Some(rows.into_iter().collect::<Result<_, _>>()?);
    Ok(summary)
}
