//! Browser bindings for the sparse-channel estimation toolkit.
//!
//! Three operations back the interactive demo page, each returning a JSON
//! document (as a string) that the page renders without any framework:
//!
//! - [`run_instance`]: draw one seeded instance and run every estimator on
//!   it — the single-trial "what does each algorithm actually produce" view.
//! - [`sweep_snr`]: a small in-browser Monte Carlo sweep producing the
//!   MSE-vs-SNR table, identical record-for-record to the native CLI at the
//!   same configuration (wall-clock fields read zero in the browser).
//! - [`trellis_trace`]: the full min-sum lattice for a small instance —
//!   every per-stage state weight, survivor path, and the brute-force
//!   cross-check — for drawing the detector's search as a trellis diagram.
//!
//! All entry points validate their arguments against browser-scale caps and
//! surface violations as `Err(JsValue)` so the page can show the message.
//! The `*_impl` functions carry the actual logic with plain `String` errors;
//! `JsValue` is only materialized at the `#[wasm_bindgen]` boundary (it
//! cannot even be constructed off-wasm), which keeps the logic natively
//! testable. Nothing here consumes OS entropy; every instance derives from
//! the caller's seed, so results are reproducible across reloads and
//! machines.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sparsechan::{
    compute_quadratics, crb_s, crb_us, draw_instance, lambda_from_prior, lse_estimate,
    map_detect_bruteforce, map_detect_trellis, omapfg_estimate, omp_estimate, run_monte_carlo,
    slse_genie, Algorithm, ExperimentConfig, OmapfgConfig, SimInstance,
};

/// Largest channel memory the single-instance and sweep views accept.
const MAX_MEMORY: usize = 64;
/// Largest training length (trellis states grow as 2^(L−1)).
const MAX_TRAINING: usize = 8;
/// Trial cap for the in-browser sweep; keeps a full grid under ~1 s.
const MAX_TRIALS: usize = 50;
/// SNR-point cap for the in-browser sweep.
const MAX_SNR_POINTS: usize = 13;
/// Memory cap for the lattice view; small enough that the 2^M brute-force
/// oracle runs instantly and the diagram stays readable.
const MAX_TRACE_MEMORY: usize = 14;
/// Training cap for the lattice view (at most 16 states per stage).
const MAX_TRACE_TRAINING: usize = 5;

/// Shared argument validation for the instance and sweep views.
fn check_geometry(memory: usize, sparsity: usize, training_len: usize) -> Result<(), String> {
    if memory == 0 || memory > MAX_MEMORY {
        return Err(format!("memory must lie in 1..={}", MAX_MEMORY));
    }
    if training_len == 0 || training_len > MAX_TRAINING || training_len > memory {
        return Err(format!(
            "training length must lie in 1..={}",
            MAX_TRAINING.min(memory)
        ));
    }
    if sparsity == 0 || sparsity > memory {
        return Err(format!("sparsity must lie in 1..={}", memory));
    }
    Ok(())
}

/// The alternating estimator needs an activity prior below 1/2.
fn check_prior(memory: usize, sparsity: usize) -> Result<(), String> {
    if 2 * sparsity >= memory {
        return Err(format!(
            "activity prior K/M = {}/{} must be below 1/2 for the alternating estimator",
            sparsity, memory
        ));
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| format!("serialization failed: {}", e))
}

fn support_indices(b: &[bool]) -> Vec<usize> {
    (0..b.len()).filter(|&i| b[i]).collect()
}

fn squared_error(truth: &[f64], estimate: &[f64]) -> f64 {
    truth
        .iter()
        .zip(estimate)
        .map(|(t, e)| (t - e) * (t - e))
        .sum()
}

// ---------------------------------------------------------------------------
// Single instance
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TruthReport {
    taps: Vec<f64>,
    support: Vec<usize>,
}

#[derive(Serialize)]
struct BoundsReport {
    /// Structured Cramér-Rao bound (support known); `null` if the restricted
    /// Gram matrix is singular.
    crb_s: Option<f64>,
    /// Unstructured bound over all M taps; `null` if the full Gram matrix is
    /// singular.
    crb_us: Option<f64>,
}

#[derive(Serialize)]
struct EstimateReport {
    algorithm: &'static str,
    taps: Vec<f64>,
    support: Vec<usize>,
    /// Squared tap error ‖h − ĥ‖₂² against the true channel.
    mse: f64,
    /// Iterations completed; absent for the one-shot estimators.
    iterations: Option<usize>,
    /// Whether the stopping rule (not the cap) ended the run; absent for the
    /// one-shot estimators.
    converged: Option<bool>,
    objective_trace: Vec<f64>,
}

#[derive(Serialize)]
struct InstanceReport {
    memory: usize,
    sparsity: usize,
    training_len: usize,
    snr_db: f64,
    seed: u64,
    sigma: f64,
    observation: Vec<f64>,
    truth: TruthReport,
    bounds: BoundsReport,
    estimates: Vec<EstimateReport>,
}

fn instance_config(
    memory: usize,
    sparsity: usize,
    training_len: usize,
    snr_db: f64,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        memory,
        sparsity,
        training_len,
        snr_grid_db: vec![snr_db],
        trials: 1,
        seed,
        algorithms: Algorithm::ALL.to_vec(),
        ..ExperimentConfig::default()
    }
}

fn run_estimates(inst: &SimInstance, sparsity: usize) -> Result<Vec<EstimateReport>, String> {
    let truth = inst.channel.taps();
    let model = &inst.model;
    let mut out = Vec::with_capacity(Algorithm::ALL.len());

    let report = |alg: Algorithm,
                  taps: Vec<f64>,
                  iters: Option<usize>,
                  conv: Option<bool>,
                  trace: Vec<f64>| {
        let support = (0..taps.len()).filter(|&i| taps[i] != 0.0).collect();
        EstimateReport {
            algorithm: alg.id(),
            mse: squared_error(truth, &taps),
            taps,
            support,
            iterations: iters,
            converged: conv,
            objective_trace: trace,
        }
    };

    let lse = lse_estimate(model, &inst.y).map_err(|e| e.to_string())?;
    out.push(report(Algorithm::Lse, lse, None, None, Vec::new()));

    let slse = slse_genie(model, &inst.y, &inst.channel.support_indices())
        .map_err(|e| e.to_string())?;
    out.push(report(Algorithm::SlseGenie, slse, None, None, Vec::new()));

    let omp = omp_estimate(model, &inst.y, sparsity).map_err(|e| e.to_string())?;
    out.push(report(
        Algorithm::Omp,
        omp.h_hat,
        Some(omp.iterations),
        None,
        omp.objective_trace,
    ));

    let params = OmapfgConfig::new(
        inst.sigma * inst.sigma,
        sparsity as f64 / inst.channel.memory() as f64,
    );
    let omapfg = omapfg_estimate(model, &inst.y, &params).map_err(|e| e.to_string())?;
    out.push(report(
        Algorithm::Omapfg,
        omapfg.h_hat,
        Some(omapfg.iterations),
        Some(omapfg.converged),
        omapfg.objective_trace,
    ));

    Ok(out)
}

fn run_instance_impl(
    memory: usize,
    sparsity: usize,
    training_len: usize,
    snr_db: f64,
    seed: u64,
) -> Result<String, String> {
    check_geometry(memory, sparsity, training_len)?;
    check_prior(memory, sparsity)?;
    if !snr_db.is_finite() {
        return Err("SNR must be finite".into());
    }

    let cfg = instance_config(memory, sparsity, training_len, snr_db, seed);
    let inst = draw_instance(&cfg, 0, 0);
    let sigma2 = inst.sigma * inst.sigma;

    let report = InstanceReport {
        memory,
        sparsity,
        training_len,
        snr_db,
        seed,
        sigma: inst.sigma,
        observation: inst.y.clone(),
        truth: TruthReport {
            taps: inst.channel.taps().to_vec(),
            support: inst.channel.support_indices(),
        },
        bounds: BoundsReport {
            crb_s: crb_s(&inst.model, &inst.channel, sigma2).ok(),
            crb_us: crb_us(&inst.model, sigma2).ok(),
        },
        estimates: run_estimates(&inst, sparsity)?,
    };
    to_json(&report)
}

/// Draw one seeded instance and run all four estimators on it.
///
/// Returns a JSON document with the true channel, the noisy observation,
/// both Cramér-Rao bounds, and per-algorithm taps, detected support, squared
/// error, and (where applicable) iteration counts and objective traces.
#[wasm_bindgen]
pub fn run_instance(
    memory: usize,
    sparsity: usize,
    training_len: usize,
    snr_db: f64,
    seed: u64,
) -> Result<String, JsValue> {
    run_instance_impl(memory, sparsity, training_len, snr_db, seed)
        .map_err(|m| JsValue::from_str(&m))
}

// ---------------------------------------------------------------------------
// SNR sweep
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SweepReport {
    memory: usize,
    sparsity: usize,
    training_len: usize,
    trials: usize,
    seed: u64,
    snr_grid_db: Vec<f64>,
    records: Vec<sparsechan::ResultRecord>,
}

fn parse_snr_list(csv: &str) -> Result<Vec<f64>, String> {
    let mut grid = Vec::new();
    for part in csv.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let v: f64 = part
            .parse()
            .map_err(|_| format!("invalid SNR value '{}'", part))?;
        if !v.is_finite() {
            return Err(format!("SNR value '{}' must be finite", part));
        }
        grid.push(v);
    }
    if grid.is_empty() {
        return Err("SNR grid must contain at least one value".into());
    }
    if grid.len() > MAX_SNR_POINTS {
        return Err(format!(
            "SNR grid is capped at {} points in the browser",
            MAX_SNR_POINTS
        ));
    }
    Ok(grid)
}

fn parse_algo_list(csv: &str) -> Result<Vec<Algorithm>, String> {
    let mut algos = Vec::new();
    for part in csv.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let alg =
            Algorithm::from_id(part).ok_or_else(|| format!("unknown algorithm '{}'", part))?;
        if algos.contains(&alg) {
            return Err(format!("algorithm '{}' listed twice", part));
        }
        algos.push(alg);
    }
    if algos.is_empty() {
        return Err("at least one algorithm is required".into());
    }
    Ok(algos)
}

fn sweep_snr_impl(
    memory: usize,
    sparsity: usize,
    training_len: usize,
    trials: usize,
    seed: u64,
    snr_csv: &str,
    algos_csv: &str,
) -> Result<String, String> {
    check_geometry(memory, sparsity, training_len)?;
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must lie in 1..={}", MAX_TRIALS));
    }
    let snr_grid_db = parse_snr_list(snr_csv)?;
    let algorithms = parse_algo_list(algos_csv)?;
    if algorithms.contains(&Algorithm::Omapfg) {
        check_prior(memory, sparsity)?;
    }

    let cfg = ExperimentConfig {
        memory,
        sparsity,
        training_len,
        snr_grid_db: snr_grid_db.clone(),
        trials,
        seed,
        algorithms,
        ..ExperimentConfig::default()
    };
    let records = run_monte_carlo(&cfg).map_err(|e| e.to_string())?;

    to_json(&SweepReport {
        memory,
        sparsity,
        training_len,
        trials,
        seed,
        snr_grid_db,
        records,
    })
}

/// Run a small Monte Carlo sweep in the browser.
///
/// `snr_csv` is a comma-separated dB grid (at most 13 points) and
/// `algos_csv` a comma-separated subset of `lse,slse,omp,omapfg`. Trials are
/// capped at 50 per point to keep the page responsive. The records match the
/// native CLI bit-for-bit at the same configuration, except that wall-clock
/// times read zero (the sandbox exposes no monotonic clock).
#[wasm_bindgen]
pub fn sweep_snr(
    memory: usize,
    sparsity: usize,
    training_len: usize,
    trials: usize,
    seed: u64,
    snr_csv: &str,
    algos_csv: &str,
) -> Result<String, JsValue> {
    sweep_snr_impl(memory, sparsity, training_len, trials, seed, snr_csv, algos_csv)
        .map_err(|m| JsValue::from_str(&m))
}

// ---------------------------------------------------------------------------
// Trellis trace
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct StateCell {
    /// Accumulated min-sum weight α; `null` marks an unreachable state.
    weight: Option<f64>,
    /// Decided support bits along the survivor path into this state, as a
    /// "0"/"1" string of length `min(stage, M)`; `null` if unreachable.
    survivor: Option<String>,
}

#[derive(Serialize)]
struct TraceReport {
    memory: usize,
    sparsity: usize,
    training_len: usize,
    snr_db: f64,
    seed: u64,
    sigma: f64,
    lambda: f64,
    num_states: usize,
    op_count: u64,
    truth_support: Vec<usize>,
    /// The least-squares tap estimate the quadratic form was built from
    /// (iteration 1 of the alternating estimator).
    h_hat: Vec<f64>,
    detected_support: Vec<usize>,
    best_cost: f64,
    bruteforce_support: Vec<usize>,
    bruteforce_cost: f64,
    /// Whether the exhaustive 2^M oracle agrees with the trellis bit-for-bit.
    oracle_agrees: bool,
    /// `stages[stage][state]` over all `M + L + 1` stages; state words pack
    /// the most recently decided bit in the lowest position.
    stages: Vec<Vec<StateCell>>,
}

fn trellis_trace_impl(
    memory: usize,
    sparsity: usize,
    training_len: usize,
    snr_db: f64,
    seed: u64,
) -> Result<String, String> {
    if memory < 2 || memory > MAX_TRACE_MEMORY {
        return Err(format!(
            "lattice view memory must lie in 2..={}",
            MAX_TRACE_MEMORY
        ));
    }
    if training_len < 2 || training_len > MAX_TRACE_TRAINING || training_len > memory {
        return Err(format!(
            "lattice view training length must lie in 2..={}",
            MAX_TRACE_TRAINING.min(memory)
        ));
    }
    if sparsity == 0 || 2 * sparsity >= memory {
        return Err(format!(
            "sparsity must lie in 1..{} so the activity prior stays below 1/2",
            memory.div_ceil(2)
        ));
    }
    if !snr_db.is_finite() {
        return Err("SNR must be finite".into());
    }

    let cfg = instance_config(memory, sparsity, training_len, snr_db, seed);
    let inst = draw_instance(&cfg, 0, 0);
    let sigma2 = inst.sigma * inst.sigma;
    let p_a = sparsity as f64 / memory as f64;
    let lambda = lambda_from_prior(sigma2, p_a).map_err(|e| e.to_string())?;

    let h_hat = lse_estimate(&inst.model, &inst.y).map_err(|e| e.to_string())?;
    let q = compute_quadratics(&inst.model, &h_hat, &inst.y, lambda);
    let run = map_detect_trellis(&q, memory);
    let (bf_support, bf_cost) = map_detect_bruteforce(&q, memory).map_err(|e| e.to_string())?;

    let num_states = 1usize << (run.bandwidth() - 1);
    let stage_count = memory + run.bandwidth() + 1;
    let stages: Vec<Vec<StateCell>> = (0..stage_count)
        .map(|stage| {
            (0..num_states as u32)
                .map(|bits| {
                    let w = run.state_weight(stage, bits);
                    StateCell {
                        weight: w.is_finite().then_some(w),
                        survivor: run.survivor(stage, bits).map(|path| {
                            path.iter().map(|&b| if b { '1' } else { '0' }).collect()
                        }),
                    }
                })
                .collect()
        })
        .collect();

    let report = TraceReport {
        memory,
        sparsity,
        training_len,
        snr_db,
        seed,
        sigma: inst.sigma,
        lambda,
        num_states,
        op_count: run.op_count(),
        truth_support: inst.channel.support_indices(),
        h_hat,
        detected_support: support_indices(run.best_support()),
        best_cost: run.best_cost(),
        bruteforce_support: support_indices(&bf_support),
        bruteforce_cost: bf_cost,
        oracle_agrees: run.best_support() == bf_support,
        stages,
    };
    to_json(&report)
}

/// Run exact MAP support detection on one small seeded instance and expose
/// the full min-sum lattice.
///
/// The quadratic form is built from the least-squares tap estimate — exactly
/// what the alternating estimator computes on its first iteration — and the
/// result is cross-checked against the exhaustive 2^M oracle.
#[wasm_bindgen]
pub fn trellis_trace(
    memory: usize,
    sparsity: usize,
    training_len: usize,
    snr_db: f64,
    seed: u64,
) -> Result<String, JsValue> {
    trellis_trace_impl(memory, sparsity, training_len, snr_db, seed)
        .map_err(|m| JsValue::from_str(&m))
}
