//! Channel estimators: the alternating MAP/least-squares estimator and the
//! reference baselines it is measured against.
//!
//! The main estimator alternates two exact steps. Given the current tap
//! estimate ĥ it detects the support b̂ by exact MAP minimization on the
//! trellis; given b̂ it refits the taps by least squares restricted to the
//! detected columns. Each step minimizes the joint objective
//! `J(h, b) = ‖y − U·(b⊙h)‖₂² + λ‖b‖₀` in one block of variables, so `J`
//! never increases across iterations. The baselines are the unstructured
//! least-squares estimator, a genie-aided structured variant that is told
//! the true support, and orthogonal matching pursuit.

use crate::numerics::{
    least_squares, masked_least_squares, NumericsError, TrainingModel,
};
use crate::trellis::{compute_quadratics, lambda_from_prior, map_detect_trellis, TrellisError};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Errors surfaced by the estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorError {
    /// A least-squares subproblem failed (rank deficiency or singular Gram).
    Numerics(NumericsError),
    /// The noise variance or activity prior does not yield a valid penalty.
    Prior(TrellisError),
}

impl fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorError::Numerics(e) => write!(f, "linear algebra failure: {}", e),
            EstimatorError::Prior(e) => write!(f, "invalid penalty parameters: {}", e),
        }
    }
}

impl std::error::Error for EstimatorError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            EstimatorError::Numerics(e) => Some(e),
            EstimatorError::Prior(e) => Some(e),
        }
    }
}

impl From<NumericsError> for EstimatorError {
    fn from(e: NumericsError) -> Self {
        EstimatorError::Numerics(e)
    }
}

impl From<TrellisError> for EstimatorError {
    fn from(e: TrellisError) -> Self {
        EstimatorError::Prior(e)
    }
}

/// A sparse channel: tap values, support indicator, and sparsity level.
///
/// For ground-truth instances the support indicator marks exactly the
/// nonzero taps and carries `K ≤ M` active entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseChannel {
    h: Vec<f64>,
    b: Vec<bool>,
    k: usize,
}

impl SparseChannel {
    /// Build a channel from explicit taps; the support and sparsity are
    /// derived from the nonzero pattern.
    pub fn from_taps(h: Vec<f64>) -> SparseChannel {
        let b: Vec<bool> = h.iter().map(|&v| v != 0.0).collect();
        let k = b.iter().filter(|&&x| x).count();
        SparseChannel { h, b, k }
    }

    /// Tap values (length M).
    pub fn taps(&self) -> &[f64] {
        &self.h
    }

    /// Support indicator (length M).
    pub fn support(&self) -> &[bool] {
        &self.b
    }

    /// Indices of the active taps, ascending.
    pub fn support_indices(&self) -> Vec<usize> {
        (0..self.b.len()).filter(|&i| self.b[i]).collect()
    }

    /// Number of active taps `K`.
    pub fn sparsity(&self) -> usize {
        self.k
    }

    /// Channel memory `M`.
    pub fn memory(&self) -> usize {
        self.h.len()
    }
}

/// Result of an iterative estimator run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorOutput {
    /// Tap estimate; exactly zero wherever `b_hat` is inactive.
    pub h_hat: Vec<f64>,
    /// Detected support.
    pub b_hat: Vec<bool>,
    /// Number of completed iterations.
    pub iterations: usize,
    /// Whether the stopping criterion (rather than the iteration cap or a
    /// collapse guard) ended the run.
    pub converged: bool,
    /// Joint objective after each full iteration; non-increasing.
    pub objective_trace: Vec<f64>,
}

/// Parameters for [`omapfg_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmapfgConfig {
    /// Noise variance σ² (assumed known at the receiver).
    pub sigma2: f64,
    /// Activity prior P(b_i = 1), in (0, 1/2); typically K/M.
    pub p_a: f64,
    /// Relative-change stopping threshold ε.
    pub eps: f64,
    /// Iteration cap.
    pub max_iter: usize,
}

impl OmapfgConfig {
    /// Config with the standard stopping rule (ε = 0.01, 50 iterations).
    pub fn new(sigma2: f64, p_a: f64) -> OmapfgConfig {
        OmapfgConfig {
            sigma2,
            p_a,
            eps: 0.01,
            max_iter: 50,
        }
    }
}

/// Joint objective `J(h, b) = ‖y − U·(b⊙h)‖₂² + λ‖b‖₀`.
fn joint_objective(
    model: &TrainingModel,
    y: &[f64],
    h: &[f64],
    b: &[bool],
    lambda: f64,
) -> f64 {
    let masked: Vec<f64> = h
        .iter()
        .zip(b)
        .map(|(&v, &on)| if on { v } else { 0.0 })
        .collect();
    let fit = model.matrix().matvec(&masked);
    let resid: f64 = y.iter().zip(&fit).map(|(a, c)| (a - c) * (a - c)).sum();
    resid + lambda * b.iter().filter(|&&on| on).count() as f64
}

/// Alternating MAP/least-squares sparse channel estimation.
///
/// Starts from the unstructured least-squares estimate, then alternates
/// exact MAP support detection (trellis min-sum on the quadratic form built
/// from the current taps) with a support-restricted least-squares refit.
/// Stops when `‖ĥ⁽ⁱ⁾−ĥ⁽ⁱ⁻¹⁾‖₂² / ‖ĥ⁽ⁱ⁾‖₂² ≤ eps`, or at the iteration cap.
/// An estimate that collapses to zero from a nonzero predecessor terminates
/// the run unconverged (the ratio criterion would divide by zero); an exact
/// repeat of the previous iterate counts as converged.
pub fn omapfg_estimate(
    model: &TrainingModel,
    y: &[f64],
    config: &OmapfgConfig,
) -> Result<EstimatorOutput, EstimatorError> {
    assert!(config.eps > 0.0, "stopping threshold must be positive");
    assert!(config.max_iter >= 1, "iteration cap must be positive");
    let m = model.memory();
    let lambda = lambda_from_prior(config.sigma2, config.p_a)?;

    let mut h = least_squares(model.matrix(), y)?;
    let mut b = vec![false; m];
    let mut objective_trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..config.max_iter {
        iterations += 1;

        let q = compute_quadratics(model, &h, y, lambda);
        b = map_detect_trellis(&q, m).best_support().to_vec();
        let h_next = masked_least_squares(model, &b, y)?;

        objective_trace.push(joint_objective(model, y, &h_next, &b, lambda));

        let diff_sq: f64 = h
            .iter()
            .zip(&h_next)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        let h_sq: f64 = h_next.iter().map(|v| v * v).sum();
        h = h_next;

        if diff_sq == 0.0 {
            converged = true;
            break;
        }
        if h_sq == 0.0 {
            break; // collapsed to zero from a nonzero iterate
        }
        if diff_sq / h_sq <= config.eps {
            converged = true;
            break;
        }
    }

    Ok(EstimatorOutput {
        h_hat: h,
        b_hat: b,
        iterations,
        converged,
        objective_trace,
    })
}

/// Unstructured least-squares estimate of all M taps.
pub fn lse_estimate(model: &TrainingModel, y: &[f64]) -> Result<Vec<f64>, NumericsError> {
    least_squares(model.matrix(), y)
}

/// Genie-aided structured least squares: fit only the columns named by
/// `support` (the true support, supplied by an oracle) and return a
/// full-length estimate that is zero elsewhere.
pub fn slse_genie(
    model: &TrainingModel,
    y: &[f64],
    support: &[usize],
) -> Result<Vec<f64>, NumericsError> {
    let m = model.memory();
    let mut mask = vec![false; m];
    for &i in support {
        assert!(i < m, "support index out of range");
        mask[i] = true;
    }
    masked_least_squares(model, &mask, y)
}

/// Orthogonal matching pursuit with a known sparsity budget.
///
/// Runs exactly `k` greedy rounds (fewer only if the residual correlation
/// vanishes identically): each round activates the not-yet-selected column
/// with the largest absolute correlation against the current residual
/// (lowest index on ties) and refits the taps by least squares on all
/// selected columns. The objective trace records the residual energy after
/// each refit.
pub fn omp_estimate(
    model: &TrainingModel,
    y: &[f64],
    k: usize,
) -> Result<EstimatorOutput, EstimatorError> {
    let m = model.memory();
    assert!(k <= m, "sparsity budget exceeds the channel memory");
    assert_eq!(y.len(), model.observation_len(), "observation length mismatch");

    let mut mask = vec![false; m];
    let mut h = vec![0.0; m];
    let mut residual = y.to_vec();
    let mut objective_trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..k {
        let correlations = model.matrix().transpose_matvec(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (i, &c) in correlations.iter().enumerate() {
            if mask[i] {
                continue;
            }
            let mag = c.abs();
            match best {
                Some((_, best_mag)) if mag <= best_mag => {}
                _ => best = Some((i, mag)),
            }
        }
        let (pick, mag) = best.expect("k <= m leaves an unselected column");
        if mag == 0.0 {
            break; // residual is orthogonal to every remaining column
        }

        mask[pick] = true;
        iterations += 1;
        h = masked_least_squares(model, &mask, y)?;
        let fit = model.matrix().matvec(&h);
        residual = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        objective_trace.push(residual.iter().map(|v| v * v).sum());
    }

    Ok(EstimatorOutput {
        h_hat: h,
        b_hat: mask,
        iterations,
        converged: true,
        objective_trace,
    })
}
