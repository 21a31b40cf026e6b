//! Synthetic experiments: instance generation, Cramér-Rao bounds, and the
//! seeded Monte Carlo driver.
//!
//! Every random draw comes from a deterministic substream keyed by
//! `(seed, SNR index, trial, purpose)`, so a configuration reproduces its
//! results exactly — iteration counts included — and adding an algorithm to
//! a run never perturbs the data the other algorithms see. Wall times are
//! measured around the estimator calls only and are the single
//! non-deterministic field in the output records.

use crate::estimators::{
    lse_estimate, omapfg_estimate, omp_estimate, slse_genie, OmapfgConfig, SparseChannel,
};
use crate::numerics::{trace_inverse_gram, NumericsError, TrainingModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Errors from experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// The configuration violates a structural constraint.
    InvalidConfig { reason: String },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidConfig { reason } => write!(f, "invalid configuration: {}", reason),
        }
    }
}

impl std::error::Error for SimError {}

/// Estimation algorithms the driver knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// Unstructured least squares over all M taps.
    #[serde(rename = "lse")]
    Lse,
    /// Structured least squares given the true support by a genie.
    #[serde(rename = "slse")]
    SlseGenie,
    /// Orthogonal matching pursuit with the known sparsity budget.
    #[serde(rename = "omp")]
    Omp,
    /// Alternating exact-MAP / least-squares estimation.
    #[serde(rename = "omapfg")]
    Omapfg,
}

impl Algorithm {
    /// Every supported algorithm, in canonical reporting order.
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Lse,
        Algorithm::SlseGenie,
        Algorithm::Omp,
        Algorithm::Omapfg,
    ];

    /// Stable textual identifier used in configs and output files.
    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Lse => "lse",
            Algorithm::SlseGenie => "slse",
            Algorithm::Omp => "omp",
            Algorithm::Omapfg => "omapfg",
        }
    }

    /// Inverse of [`Algorithm::id`].
    pub fn from_id(s: &str) -> Option<Algorithm> {
        Algorithm::ALL.into_iter().find(|a| a.id() == s)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Full description of a Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Channel memory M.
    pub memory: usize,
    /// Number of active taps K.
    pub sparsity: usize,
    /// Training sequence length L.
    pub training_len: usize,
    /// SNR grid in dB, evaluated in the given order.
    pub snr_grid_db: Vec<f64>,
    /// Trials per SNR point.
    pub trials: usize,
    /// Stopping threshold ε for the alternating estimator.
    pub eps: f64,
    /// Iteration cap for the alternating estimator.
    pub max_iter: usize,
    /// Master seed; all randomness derives from it.
    pub seed: u64,
    /// Algorithms to run, in reporting order.
    pub algorithms: Vec<Algorithm>,
}

impl Default for ExperimentConfig {
    /// The desk-scale reference protocol: M=30, K=5, L=5, 100 trials per
    /// point on a 0..30 dB grid.
    fn default() -> Self {
        ExperimentConfig {
            memory: 30,
            sparsity: 5,
            training_len: 5,
            snr_grid_db: (0..=6).map(|i| 5.0 * i as f64).collect(),
            trials: 100,
            eps: 0.01,
            max_iter: 50,
            seed: 42,
            algorithms: Algorithm::ALL.to_vec(),
        }
    }
}

impl ExperimentConfig {
    /// Check the structural invariants; returns the offending detail on
    /// failure.
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |reason: String| Err(SimError::InvalidConfig { reason });
        if self.memory == 0 {
            return fail("memory must be at least 1".into());
        }
        if self.sparsity > self.memory {
            return fail(format!(
                "sparsity {} exceeds memory {}",
                self.sparsity, self.memory
            ));
        }
        if self.training_len == 0 || self.training_len > self.memory {
            return fail(format!(
                "training length {} must lie in 1..={}",
                self.training_len, self.memory
            ));
        }
        if self.snr_grid_db.is_empty() {
            return fail("SNR grid must be non-empty".into());
        }
        if self.trials == 0 {
            return fail("at least one trial is required".into());
        }
        if !(self.eps > 0.0) {
            return fail(format!("eps must be positive, got {}", self.eps));
        }
        if self.max_iter == 0 {
            return fail("max_iter must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return fail("at least one algorithm is required".into());
        }
        Ok(())
    }
}

/// Aggregated result for one (algorithm, SNR) grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub algorithm: Algorithm,
    pub snr_db: f64,
    /// Mean of ‖h − ĥ‖₂² over successful trials.
    pub mse: f64,
    /// Mean of ‖h − ĥ‖₂² / ‖h‖₂² over successful trials.
    pub nmse: f64,
    /// Mean structured bound σ²·Tr{(U_τᵀU_τ)⁻¹} over the point's instances.
    pub crb_s: f64,
    /// Mean unstructured bound σ²·Tr{(UᵀU)⁻¹} over the point's instances.
    pub crb_us: f64,
    /// Mean iteration count over successful trials.
    pub mean_iterations: f64,
    /// Trials that failed (estimator error or singular bound computation).
    pub failures: usize,
    /// True when more than 5% of the point's trials failed.
    pub flagged: bool,
    /// Total wall time spent inside the estimator across trials, seconds.
    pub wall_time_s: f64,
}

/// One fully drawn problem instance.
#[derive(Debug, Clone)]
pub struct SimInstance {
    pub model: TrainingModel,
    pub channel: SparseChannel,
    /// Noise-free observation `U h`.
    pub clean: Vec<f64>,
    /// Noisy observation `y = U h + n`.
    pub y: Vec<f64>,
    /// Noise standard deviation used for this instance.
    pub sigma: f64,
    pub snr_db: f64,
}

// ---------------------------------------------------------------------------
// Deterministic substreams
// ---------------------------------------------------------------------------

const PURPOSE_CHANNEL: u64 = 1;
const PURPOSE_TRAINING: u64 = 2;
const PURPOSE_NOISE: u64 = 3;

/// 64-bit finalizer with full avalanche; distinct inputs map to
/// well-separated outputs.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent substream for one `(seed, snr index, trial, purpose)` tuple.
fn substream(seed: u64, snr_idx: usize, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut s = seed;
    for v in [snr_idx as u64, trial as u64, purpose] {
        s = mix64(s.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(v));
    }
    ChaCha8Rng::seed_from_u64(s)
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// K-sparse channel: support uniform among size-K subsets, active taps
/// i.i.d. standard normal (resampled in the measure-zero event of an exact
/// zero, so the support indicator stays faithful).
pub fn generate_sparse_channel(m: usize, k: usize, rng: &mut impl Rng) -> SparseChannel {
    assert!(k <= m, "sparsity exceeds memory");
    let mut idx: Vec<usize> = (0..m).collect();
    for i in 0..k {
        let j = rng.random_range(i..m);
        idx.swap(i, j);
    }
    let mut h = vec![0.0; m];
    for &i in &idx[..k] {
        let mut tap: f64 = StandardNormal.sample(rng);
        while tap == 0.0 {
            tap = StandardNormal.sample(rng);
        }
        h[i] = tap;
    }
    SparseChannel::from_taps(h)
}

/// Training sequence of i.i.d. symbols drawn uniformly from {+1, −1}.
pub fn generate_training_sequence(l: usize, rng: &mut impl Rng) -> Vec<f64> {
    assert!(l >= 1, "training sequence must be non-empty");
    (0..l)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Noise standard deviation that realizes a target SNR, defined as
/// per-observation signal power: `σ² = ‖Uh‖₂² / (N · 10^(snr_db/10))`.
pub fn sigma_from_snr(model: &TrainingModel, h: &[f64], snr_db: f64) -> f64 {
    let clean = model.matrix().matvec(h);
    let power: f64 = clean.iter().map(|v| v * v).sum();
    let n = model.observation_len() as f64;
    (power / (n * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// Add i.i.d. zero-mean Gaussian noise of standard deviation `sigma`.
pub fn awgn(clean: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    assert!(sigma >= 0.0, "noise level must be nonnegative");
    clean
        .iter()
        .map(|&v| {
            let unit: f64 = StandardNormal.sample(rng);
            v + sigma * unit
        })
        .collect()
}

/// Draw the complete instance for one (SNR index, trial) cell of an
/// experiment. Deterministic in `(cfg.seed, snr_idx, trial)`; the driver and
/// any post-hoc analysis reconstruct byte-identical instances.
pub fn draw_instance(cfg: &ExperimentConfig, snr_idx: usize, trial: usize) -> SimInstance {
    assert!(snr_idx < cfg.snr_grid_db.len(), "SNR index out of range");
    let snr_db = cfg.snr_grid_db[snr_idx];

    let mut channel_rng = substream(cfg.seed, snr_idx, trial, PURPOSE_CHANNEL);
    let channel = generate_sparse_channel(cfg.memory, cfg.sparsity, &mut channel_rng);

    let mut training_rng = substream(cfg.seed, snr_idx, trial, PURPOSE_TRAINING);
    let u = generate_training_sequence(cfg.training_len, &mut training_rng);
    let model = TrainingModel::new(u, cfg.memory).expect("validated geometry");

    let clean = model.matrix().matvec(channel.taps());
    let sigma = sigma_from_snr(&model, channel.taps(), snr_db);

    let mut noise_rng = substream(cfg.seed, snr_idx, trial, PURPOSE_NOISE);
    let y = awgn(&clean, sigma, &mut noise_rng);

    SimInstance {
        model,
        channel,
        clean,
        y,
        sigma,
        snr_db,
    }
}

// ---------------------------------------------------------------------------
// Cramér-Rao bounds
// ---------------------------------------------------------------------------

/// Unstructured bound σ²·Tr{(UᵀU)⁻¹}: the MSE floor when nothing is known
/// about the support.
pub fn crb_us(model: &TrainingModel, sigma2: f64) -> Result<f64, NumericsError> {
    Ok(sigma2 * trace_inverse_gram(model.matrix())?)
}

/// Structured bound σ²·Tr{(U_τᵀU_τ)⁻¹} over the channel's true support τ:
/// the MSE floor when the support is known. Zero for an empty support
/// (there is nothing left to estimate).
pub fn crb_s(
    model: &TrainingModel,
    channel: &SparseChannel,
    sigma2: f64,
) -> Result<f64, NumericsError> {
    let support = channel.support_indices();
    if support.is_empty() {
        return Ok(0.0);
    }
    let restricted = model.matrix().select_columns(&support);
    Ok(sigma2 * trace_inverse_gram(&restricted)?)
}

// ---------------------------------------------------------------------------
// Monte Carlo driver
// ---------------------------------------------------------------------------

/// Monotonic wall-clock timing around a call; reports zero on targets
/// without a usable clock (the browser sandbox).
fn time_call<T>(f: impl FnOnce() -> T) -> (T, f64) {
    #[cfg(not(target_arch = "wasm32"))]
    {
        let t0 = std::time::Instant::now();
        let out = f();
        (out, t0.elapsed().as_secs_f64())
    }
    #[cfg(target_arch = "wasm32")]
    {
        (f(), 0.0)
    }
}

/// Run one algorithm on one instance; returns the estimate and its
/// iteration count, or `Err` on any estimator failure.
fn run_algorithm(
    alg: Algorithm,
    inst: &SimInstance,
    cfg: &ExperimentConfig,
) -> Result<(Vec<f64>, usize), ()> {
    match alg {
        Algorithm::Lse => lse_estimate(&inst.model, &inst.y)
            .map(|h| (h, 1))
            .map_err(|_| ()),
        Algorithm::SlseGenie => {
            slse_genie(&inst.model, &inst.y, &inst.channel.support_indices())
                .map(|h| (h, 1))
                .map_err(|_| ())
        }
        Algorithm::Omp => omp_estimate(&inst.model, &inst.y, cfg.sparsity)
            .map(|o| (o.h_hat, o.iterations))
            .map_err(|_| ()),
        Algorithm::Omapfg => {
            let params = OmapfgConfig {
                sigma2: inst.sigma * inst.sigma,
                p_a: cfg.sparsity as f64 / cfg.memory as f64,
                eps: cfg.eps,
                max_iter: cfg.max_iter,
            };
            omapfg_estimate(&inst.model, &inst.y, &params)
                .map(|o| (o.h_hat, o.iterations))
                .map_err(|_| ())
        }
    }
}

#[derive(Default, Clone)]
struct CellAccumulator {
    mse_sum: f64,
    nmse_sum: f64,
    iter_sum: f64,
    successes: usize,
    failures: usize,
    wall_time_s: f64,
}

/// Run the full Monte Carlo experiment.
///
/// For every SNR point and trial, one instance is drawn from the seed's
/// substreams and shared by all configured algorithms. Per-trial estimator
/// failures are counted into the record for their (algorithm, SNR) cell
/// rather than aborting the run; a cell whose failure rate exceeds 5% is
/// flagged. Everything except `wall_time_s` is deterministic in the config.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>, SimError> {
    cfg.validate()?;
    let num_algos = cfg.algorithms.len();
    let num_snrs = cfg.snr_grid_db.len();

    let mut cells = vec![CellAccumulator::default(); num_algos * num_snrs];
    let mut crb_s_sums = vec![0.0; num_snrs];
    let mut crb_us_sums = vec![0.0; num_snrs];
    let mut valid_instances = vec![0usize; num_snrs];

    for snr_idx in 0..num_snrs {
        for trial in 0..cfg.trials {
            let inst = draw_instance(cfg, snr_idx, trial);
            let sigma2 = inst.sigma * inst.sigma;

            let bounds = crb_us(&inst.model, sigma2)
                .and_then(|us| crb_s(&inst.model, &inst.channel, sigma2).map(|s| (s, us)));
            let (bound_s, bound_us) = match bounds {
                Ok(pair) => pair,
                Err(_) => {
                    // The instance itself is unusable; charge the failure to
                    // every algorithm at this point.
                    for a in 0..num_algos {
                        cells[a * num_snrs + snr_idx].failures += 1;
                    }
                    continue;
                }
            };
            crb_s_sums[snr_idx] += bound_s;
            crb_us_sums[snr_idx] += bound_us;
            valid_instances[snr_idx] += 1;

            let h_energy: f64 = inst.channel.taps().iter().map(|v| v * v).sum();
            for (a, &alg) in cfg.algorithms.iter().enumerate() {
                let cell = &mut cells[a * num_snrs + snr_idx];
                let (outcome, elapsed) = time_call(|| run_algorithm(alg, &inst, cfg));
                cell.wall_time_s += elapsed;
                match outcome {
                    Ok((h_hat, iterations)) => {
                        let mse: f64 = inst
                            .channel
                            .taps()
                            .iter()
                            .zip(&h_hat)
                            .map(|(t, e)| (t - e) * (t - e))
                            .sum();
                        cell.mse_sum += mse;
                        cell.nmse_sum += if h_energy > 0.0 {
                            mse / h_energy
                        } else if mse == 0.0 {
                            0.0
                        } else {
                            f64::INFINITY
                        };
                        cell.iter_sum += iterations as f64;
                        cell.successes += 1;
                    }
                    Err(()) => cell.failures += 1,
                }
            }
        }
    }

    let mut records = Vec::with_capacity(num_algos * num_snrs);
    for (a, &alg) in cfg.algorithms.iter().enumerate() {
        for snr_idx in 0..num_snrs {
            let cell = &cells[a * num_snrs + snr_idx];
            let mean = |sum: f64| {
                if cell.successes > 0 {
                    sum / cell.successes as f64
                } else {
                    f64::NAN
                }
            };
            let crb_mean = |sum: f64| {
                if valid_instances[snr_idx] > 0 {
                    sum / valid_instances[snr_idx] as f64
                } else {
                    f64::NAN
                }
            };
            records.push(ResultRecord {
                algorithm: alg,
                snr_db: cfg.snr_grid_db[snr_idx],
                mse: mean(cell.mse_sum),
                nmse: mean(cell.nmse_sum),
                crb_s: crb_mean(crb_s_sums[snr_idx]),
                crb_us: crb_mean(crb_us_sums[snr_idx]),
                mean_iterations: mean(cell.iter_sum),
                failures: cell.failures,
                flagged: cell.failures * 20 > cfg.trials,
                wall_time_s: cell.wall_time_s,
            });
        }
    }
    Ok(records)
}
