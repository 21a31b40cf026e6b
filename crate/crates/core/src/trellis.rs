//! Exact MAP support detection on a trellis.
//!
//! The detector minimizes
//!
//! ```text
//!     g(b) = bᵀXb − 2zᵀb + λ‖b‖₀,    b ∈ {0,1}^M
//! ```
//!
//! where `X = U_ĥᵀU_ĥ` is the Gram matrix of the column-scaled training
//! matrix and `z = U_ĥᵀy`. Because `X` is banded with half-bandwidth `L`
//! (training length), `g` splits into per-section local costs that depend
//! only on the current bit and the previous `L−1` bits. Packing that window
//! into a state word turns the minimization into a shortest-path problem on
//! a trellis with `2^(L−1)` states per stage, solved exactly by the min-sum
//! recursion in the `(ℝ, min, +)` semiring. A full-enumeration oracle is
//! provided for verification at small sizes.

use crate::numerics::{Matrix, TrainingModel};
use std::fmt;

/// Errors from prior conversion, state construction, and the oracle guard.
#[derive(Debug, Clone, PartialEq)]
pub enum TrellisError {
    /// Noise variance must be strictly positive.
    InvalidNoiseVariance { sigma2: f64 },
    /// Activity prior must lie strictly inside (0, 1/2).
    InvalidPrior { p_a: f64 },
    /// Brute-force enumeration is refused beyond 2^20 candidates.
    MemoryTooLargeForBruteforce { memory: usize },
    /// State word carries bits that the stage's boundary conditions pin to zero.
    IllegalState { bits: u32, stage: usize },
}

impl fmt::Display for TrellisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrellisError::InvalidNoiseVariance { sigma2 } => {
                write!(f, "noise variance must be positive, got {}", sigma2)
            }
            TrellisError::InvalidPrior { p_a } => {
                write!(f, "activity prior must lie in (0, 1/2), got {}", p_a)
            }
            TrellisError::MemoryTooLargeForBruteforce { memory } => {
                write!(
                    f,
                    "brute-force search over 2^{} supports refused (limit 2^20)",
                    memory
                )
            }
            TrellisError::IllegalState { bits, stage } => {
                write!(
                    f,
                    "state word {:#b} is illegal at stage {} (boundary bits must be zero)",
                    bits, stage
                )
            }
        }
    }
}

impl std::error::Error for TrellisError {}

/// Sparsity penalty λ = 2σ²·ln((1−p_a)/p_a) induced by an i.i.d. Bernoulli
/// activity prior with P(active) = `p_a` under noise variance `sigma2`.
///
/// Strictly positive for every admissible prior; `p_a` outside (0, 1/2) or a
/// non-positive variance is rejected rather than producing a non-positive
/// penalty. λ = 0 is still accepted by the detector itself for zero-penalty
/// testing.
pub fn lambda_from_prior(sigma2: f64, p_a: f64) -> Result<f64, TrellisError> {
    if !(sigma2 > 0.0) {
        return Err(TrellisError::InvalidNoiseVariance { sigma2 });
    }
    if !(p_a > 0.0 && p_a < 0.5) {
        return Err(TrellisError::InvalidPrior { p_a });
    }
    Ok(2.0 * sigma2 * ((1.0 - p_a) / p_a).ln())
}

// ---------------------------------------------------------------------------
// Quadratic form
// ---------------------------------------------------------------------------

/// The quadratic support objective `g(b) = bᵀXb − 2zᵀb + λ‖b‖₀` in banded
/// storage.
///
/// `X` is symmetric positive semidefinite with `X[i][j] = 0` whenever
/// `|i−j| ≥ L`; only the `2L−1` central bands are ever computed or stored.
/// `y_energy = ‖y‖₂²` is carried along so costs can be reconciled with the
/// residual form `‖y − U_ĥ·b‖₂² + λ‖b‖₀`, which differs from `g` by exactly
/// that constant.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    m: usize,
    bandwidth: usize,
    /// `bands[i*bandwidth + d]` holds `X[i][i+d]` for `d ∈ 0..bandwidth`;
    /// slots past the matrix edge stay zero.
    bands: Vec<f64>,
    z: Vec<f64>,
    lambda: f64,
    y_energy: f64,
}

impl QuadraticForm {
    /// Number of support bits `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Half-bandwidth `L` of `X` (the training-sequence length).
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Correlation vector `z`.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Sparsity penalty λ.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The constant `‖y‖₂²` dropped from the residual objective.
    pub fn y_energy(&self) -> f64 {
        self.y_energy
    }

    #[inline]
    fn band(&self, i: usize, d: usize) -> f64 {
        self.bands[i * self.bandwidth + d]
    }

    /// Entry `X[i][j]`; exactly zero outside the stored bands.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.m && j < self.m);
        let (lo, d) = if i <= j { (i, j - i) } else { (j, i - j) };
        if d >= self.bandwidth {
            0.0
        } else {
            self.band(lo, d)
        }
    }

    /// Dense copy of `X`, for oracles and inspection.
    pub fn to_dense(&self) -> Matrix {
        Matrix::from_fn(self.m, self.m, |i, j| self.entry(i, j))
    }

    /// Assemble a form from an explicit dense `X`; intended for tests and
    /// demos that need hand-picked coefficients. `x` must be symmetric and
    /// banded: entries with `|i−j| ≥ bandwidth` must be exactly zero.
    pub fn from_dense(
        x: &Matrix,
        z: &[f64],
        lambda: f64,
        y_energy: f64,
        bandwidth: usize,
    ) -> QuadraticForm {
        let m = x.rows();
        assert_eq!(x.cols(), m, "X must be square");
        assert_eq!(z.len(), m, "z length mismatch");
        assert!(bandwidth >= 1 && bandwidth <= m, "bandwidth out of range");
        assert!(lambda >= 0.0, "penalty must be nonnegative");
        let mut bands = vec![0.0; m * bandwidth];
        for i in 0..m {
            for j in 0..m {
                let v = x.get(i, j);
                if j >= i && j - i < bandwidth {
                    bands[i * bandwidth + (j - i)] = v;
                } else if j < i && i - j < bandwidth {
                    assert_eq!(v, x.get(j, i), "X must be symmetric");
                } else {
                    assert_eq!(v, 0.0, "X must vanish outside the bands");
                }
            }
        }
        QuadraticForm {
            m,
            bandwidth,
            bands,
            z: z.to_vec(),
            lambda,
            y_energy,
        }
    }
}

/// Build the quadratic support objective for the current channel estimate.
///
/// With `U_ĥ = U·diag(ĥ)` this is `X = U_ĥᵀU_ĥ`, `z = U_ĥᵀy`. The Toeplitz
/// structure of `U` collapses the Gram matrix to the training-sequence
/// autocorrelation: `X[i][i+d] = ĥ_i·ĥ_{i+d}·ρ(d)` with
/// `ρ(d) = Σ_t u[t]·u[t+d]`, so entries outside the `2L−1` central bands are
/// identically zero and are never computed.
pub fn compute_quadratics(
    model: &TrainingModel,
    h_hat: &[f64],
    y: &[f64],
    lambda: f64,
) -> QuadraticForm {
    let m = model.memory();
    let l = model.training_len();
    let u = model.training();
    assert_eq!(h_hat.len(), m, "channel estimate length mismatch");
    assert_eq!(y.len(), model.observation_len(), "observation length mismatch");
    assert!(lambda >= 0.0, "penalty must be nonnegative");

    let rho: Vec<f64> = (0..l)
        .map(|d| (0..l - d).map(|t| u[t] * u[t + d]).sum())
        .collect();

    let mut bands = vec![0.0; m * l];
    for i in 0..m {
        let dmax = l.min(m - i);
        for d in 0..dmax {
            bands[i * l + d] = h_hat[i] * h_hat[i + d] * rho[d];
        }
    }

    let z: Vec<f64> = (0..m)
        .map(|i| h_hat[i] * (0..l).map(|t| u[t] * y[i + t]).sum::<f64>())
        .collect();

    QuadraticForm {
        m,
        bandwidth: l,
        bands,
        z,
        lambda,
        y_energy: y.iter().map(|v| v * v).sum(),
    }
}

/// Evaluate `g(b) = bᵀXb − 2zᵀb + λ‖b‖₀` for an explicit support vector.
pub fn support_cost(q: &QuadraticForm, support: &[bool]) -> f64 {
    assert_eq!(support.len(), q.m, "support length mismatch");
    let mut acc = 0.0;
    for i in 0..q.m {
        if !support[i] {
            continue;
        }
        acc += q.entry(i, i) - 2.0 * q.z[i] + q.lambda;
        for j in (i + 1)..q.m.min(i + q.bandwidth) {
            if support[j] {
                acc += 2.0 * q.entry(i, j);
            }
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Trellis states
// ---------------------------------------------------------------------------

/// A trellis node: the window of previously decided bits
/// `(b_{i−1}, …, b_{i−L+1})` packed into a word (most recent bit in the
/// lowest position) together with the stage index `i ∈ [0, M+L]`.
///
/// Bits whose section index falls outside `[0, M)` are pinned to zero by the
/// boundary conditions; [`TrellisState::new`] rejects words that violate
/// this.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrellisState {
    bits: u32,
    stage: usize,
}

impl TrellisState {
    /// The all-zero state at stage 0 where every path starts.
    pub fn initial() -> TrellisState {
        TrellisState { bits: 0, stage: 0 }
    }

    /// Validated constructor for a state at `stage` on a trellis with the
    /// given `bandwidth` (L) and `memory` (M).
    pub fn new(
        bits: u32,
        stage: usize,
        bandwidth: usize,
        memory: usize,
    ) -> Result<TrellisState, TrellisError> {
        assert!(bandwidth >= 1 && memory >= bandwidth, "bad trellis geometry");
        let width = bandwidth - 1;
        let illegal = |bits, stage| TrellisError::IllegalState { bits, stage };
        if stage > memory + bandwidth {
            return Err(illegal(bits, stage));
        }
        if width < 32 && bits >> width != 0 {
            return Err(illegal(bits, stage));
        }
        // Window position p refers to section stage−1−p.
        if stage < width && bits >> stage != 0 {
            // Sections before 0 do not exist.
            return Err(illegal(bits, stage));
        }
        if stage > memory {
            // Sections at or past M are already merged to zero.
            let pinned = (stage - memory).min(width);
            if pinned < 32 && bits & ((1u32 << pinned) - 1) != 0 {
                return Err(illegal(bits, stage));
            }
        }
        Ok(TrellisState { bits, stage })
    }

    /// The packed window word.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Stage index.
    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Bit decided `k` sections ago (`k = 1` is the most recent decision);
    /// positions beyond the window width read as zero.
    pub fn previous_bit(&self, k: usize) -> bool {
        assert!(k >= 1, "lookback starts at the previous section");
        k <= 32 && (self.bits >> (k - 1)) & 1 == 1
    }

    /// Successor state after deciding `bit`: shift the window left by one,
    /// insert the new bit at the bottom, and drop the oldest bit.
    pub fn advance(&self, bit: bool, bandwidth: usize) -> TrellisState {
        let width = bandwidth - 1;
        let mask = if width == 0 { 0 } else { (1u32 << width) - 1 };
        TrellisState {
            bits: ((self.bits << 1) | bit as u32) & mask,
            stage: self.stage + 1,
        }
    }
}

/// Per-section cost `f̃_i(b_i, s_i)`: zero when `b_i = 0`, otherwise
///
/// ```text
///     X[i][i] + Σ_j 2·b_j·X[j][i] − 2·z[i] + λ
/// ```
///
/// with `j` ranging over the decided window `[max(0, i−L+1), i−1]`; window
/// positions that would refer to sections before 0 contribute nothing.
pub fn local_cost(q: &QuadraticForm, i: usize, b_i: bool, state: TrellisState) -> f64 {
    debug_assert!(i < q.m, "section index out of range");
    debug_assert_eq!(state.stage(), i, "state must belong to stage i");
    local_cost_raw(q, i, b_i, state.bits())
}

#[inline]
fn local_cost_raw(q: &QuadraticForm, i: usize, b_i: bool, window: u32) -> f64 {
    if !b_i {
        return 0.0;
    }
    let mut acc = q.band(i, 0) - 2.0 * q.z[i] + q.lambda;
    let kmax = (q.bandwidth - 1).min(i);
    for k in 1..=kmax {
        if (window >> (k - 1)) & 1 == 1 {
            acc += 2.0 * q.band(i - k, k);
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Min-sum detection
// ---------------------------------------------------------------------------

/// Completed min-sum run: per-stage accumulated weights, survivor paths,
/// and the global optimum.
#[derive(Debug, Clone)]
pub struct TrellisRun {
    m: usize,
    bandwidth: usize,
    /// `alpha[stage][state]`: minimal accumulated cost of any path reaching
    /// the state; `f64::INFINITY` marks unreachable states.
    alpha: Vec<Vec<f64>>,
    /// Winning incoming edge `(previous state, decided bit)` per section
    /// stage `1..=M`; survivor paths are rebuilt from these on demand.
    section_back: Vec<Vec<(u32, bool)>>,
    /// Winning predecessor per tail stage `M+1..=M+L` (the decided bit is
    /// always zero there).
    tail_back: Vec<Vec<u32>>,
    best_support: Vec<bool>,
    best_cost: f64,
    op_count: u64,
}

impl TrellisRun {
    /// Global minimizer of `g` over `{0,1}^M` (lexicographically smallest
    /// among ties).
    pub fn best_support(&self) -> &[bool] {
        &self.best_support
    }

    /// Global minimum of `g`.
    pub fn best_cost(&self) -> f64 {
        self.best_cost
    }

    /// Number of `(α + γ)` accumulations performed: exactly `M · 2^L`,
    /// independent of the instance.
    pub fn op_count(&self) -> u64 {
        self.op_count
    }

    /// Number of support bits `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Half-bandwidth `L`.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Accumulated weight α of a state, `f64::INFINITY` if unreachable.
    pub fn state_weight(&self, stage: usize, bits: u32) -> f64 {
        assert!(stage < self.alpha.len(), "stage out of range");
        assert!((bits as usize) < self.alpha[stage].len(), "state out of range");
        self.alpha[stage][bits as usize]
    }

    /// Survivor path into a state: the `min(stage, M)` bits decided so far
    /// along the minimal path, or `None` if the state is unreachable.
    pub fn survivor(&self, stage: usize, bits: u32) -> Option<Vec<bool>> {
        if stage >= self.alpha.len() || bits as usize >= self.alpha[stage].len() {
            return None;
        }
        if !self.alpha[stage][bits as usize].is_finite() {
            return None;
        }
        let mut state = bits;
        let mut s = stage;
        while s > self.m {
            state = self.tail_back[s - self.m - 1][state as usize];
            s -= 1;
        }
        Some(trace_bits(&self.section_back, s, state))
    }
}

/// Bits decided in sections `0..stage` along the survivor chain ending at
/// `state` (requires `stage ≤ M`).
fn trace_bits(section_back: &[Vec<(u32, bool)>], stage: usize, state: u32) -> Vec<bool> {
    let mut bits = vec![false; stage];
    let mut s = state;
    for j in (0..stage).rev() {
        let (prev, bit) = section_back[j][s as usize];
        bits[j] = bit;
        s = prev;
    }
    bits
}

/// Exact MAP support detection by the min-sum recursion.
///
/// Paths start at the all-zero state with weight 0; every other stage-0
/// state carries `+∞`, which is absorbing under `+` and neutral under `min`,
/// so illegal boundary states never influence the optimum. Section stages
/// `0..M` accumulate the local costs; tail stages `M..M+L` shift zeros in
/// with zero edge weight and only merge states, so the single stage-`M+L`
/// state holds the global minimum.
///
/// Exact weight ties are broken toward the lexicographically smallest
/// decided-bit sequence, which in particular prefers `b_i = 0` when a single
/// section bit is the only difference; the brute-force oracle applies the
/// same rule, so tied instances still agree bit-for-bit.
pub fn map_detect_trellis(q: &QuadraticForm, m: usize) -> TrellisRun {
    assert_eq!(m, q.m, "memory inconsistent with the quadratic form");
    let l = q.bandwidth;
    assert!(l <= 24, "state space 2^(L-1) too large");
    let width = l - 1;
    let num_states = 1usize << width;
    let mask = (num_states as u32).wrapping_sub(1);

    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(m + l + 1);
    let mut start = vec![f64::INFINITY; num_states];
    start[0] = 0.0;
    alpha.push(start);

    let mut section_back: Vec<Vec<(u32, bool)>> = Vec::with_capacity(m);
    let mut op_count: u64 = 0;

    // Section stages: one decided bit each. Every (state, bit) pair is
    // enumerated uniformly — unreachable states simply propagate +∞ — so the
    // accumulation count is exactly M·2^L regardless of the instance.
    for i in 0..m {
        let prev = &alpha[i];
        let mut next = vec![f64::INFINITY; num_states];
        let mut back = vec![(0u32, false); num_states];
        for src in 0..num_states as u32 {
            for bit in [false, true] {
                let gamma = local_cost_raw(q, i, bit, src);
                let cand = prev[src as usize] + gamma;
                op_count += 1;
                let dest = (((src << 1) | bit as u32) & mask) as usize;
                if cand < next[dest] {
                    next[dest] = cand;
                    back[dest] = (src, bit);
                } else if cand == next[dest] && cand.is_finite() {
                    let mut challenger = trace_bits(&section_back, i, src);
                    challenger.push(bit);
                    let (inc_src, inc_bit) = back[dest];
                    let mut incumbent = trace_bits(&section_back, i, inc_src);
                    incumbent.push(inc_bit);
                    if challenger < incumbent {
                        next[dest] = cand;
                        back[dest] = (src, bit);
                    }
                }
            }
        }
        alpha.push(next);
        section_back.push(back);
    }

    // Tail stages: deterministic zero-shifts with zero edge weight; states
    // merge pairwise until only the all-zero state remains populated.
    let mut tail_back: Vec<Vec<u32>> = Vec::with_capacity(l);
    for t in 0..l {
        let prev = &alpha[m + t];
        let mut next = vec![f64::INFINITY; num_states];
        let mut back = vec![0u32; num_states];
        for src in 0..num_states as u32 {
            let cand = prev[src as usize];
            let dest = ((src << 1) & mask) as usize;
            if cand < next[dest] {
                next[dest] = cand;
                back[dest] = src;
            } else if cand == next[dest] && cand.is_finite() {
                let challenger = tail_path(&section_back, &tail_back, m, t, src);
                let incumbent = tail_path(&section_back, &tail_back, m, t, back[dest]);
                if challenger < incumbent {
                    next[dest] = cand;
                    back[dest] = src;
                }
            }
        }
        alpha.push(next);
        tail_back.push(back);
    }

    // Trace the single surviving path back out of the tail.
    let mut state = 0u32;
    for t in (0..l).rev() {
        state = tail_back[t][state as usize];
    }
    let best_support = trace_bits(&section_back, m, state);
    let best_cost = alpha[m + l][0];

    TrellisRun {
        m,
        bandwidth: l,
        alpha,
        section_back,
        tail_back,
        best_support,
        best_cost,
        op_count,
    }
}

/// Full decided-bit sequence of the survivor chain ending at `state` on tail
/// stage `M + t` (used only to order exact ties during tail merges).
fn tail_path(
    section_back: &[Vec<(u32, bool)>],
    tail_back: &[Vec<u32>],
    m: usize,
    t: usize,
    state: u32,
) -> Vec<bool> {
    let mut s = state;
    for stage in (0..t).rev() {
        s = tail_back[stage][s as usize];
    }
    trace_bits(section_back, m, s)
}

/// Exact MAP detection by full enumeration of all `2^M` supports; the
/// verification oracle for [`map_detect_trellis`].
///
/// Candidates are scanned in lexicographic order of `(b_0, b_1, …)` with a
/// strict improvement rule, so the reported minimizer is the
/// lexicographically smallest one — the same tie-break the trellis applies.
pub fn map_detect_bruteforce(
    q: &QuadraticForm,
    m: usize,
) -> Result<(Vec<bool>, f64), TrellisError> {
    assert_eq!(m, q.m, "memory inconsistent with the quadratic form");
    if m > 20 {
        return Err(TrellisError::MemoryTooLargeForBruteforce { memory: m });
    }
    let x = q.to_dense();
    let mut best_word = 0u32;
    let mut best_cost = f64::INFINITY;
    for word in 0u32..1 << m {
        // b_i sits at position m−1−i so that ascending words scan supports
        // in lexicographic order.
        let mut cost = 0.0;
        for i in 0..m {
            if (word >> (m - 1 - i)) & 1 == 0 {
                continue;
            }
            cost += x.get(i, i) - 2.0 * q.z[i] + q.lambda;
            for j in (i + 1)..m {
                if (word >> (m - 1 - j)) & 1 == 1 {
                    cost += 2.0 * x.get(i, j);
                }
            }
        }
        if cost < best_cost {
            best_cost = cost;
            best_word = word;
        }
    }
    let support = (0..m)
        .map(|i| (best_word >> (m - 1 - i)) & 1 == 1)
        .collect();
    Ok((support, best_cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::TrainingModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn random_pm1(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect()
    }

    /// Random detection instance of the kind the estimator loop produces.
    fn random_instance(m: usize, l: usize, rng: &mut ChaCha8Rng) -> (TrainingModel, QuadraticForm) {
        let model = TrainingModel::new(random_pm1(l, rng), m).unwrap();
        let h_hat = random_vec(m, rng);
        let y = random_vec(model.observation_len(), rng);
        let sigma2 = 0.1 + rng.random::<f64>();
        let p_a = 0.05 + 0.4 * rng.random::<f64>();
        let lambda = lambda_from_prior(sigma2, p_a).unwrap();
        let q = compute_quadratics(&model, &h_hat, &y, lambda);
        (model, q)
    }

    /// Test-only oracle: evaluate g via the fully dense quadratic form.
    fn dense_cost(q: &QuadraticForm, b: &[bool]) -> f64 {
        let x = q.to_dense();
        let m = q.m();
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                if b[i] && b[j] {
                    acc += x.get(i, j);
                }
            }
        }
        for i in 0..m {
            if b[i] {
                acc += -2.0 * q.z()[i] + q.lambda();
            }
        }
        acc
    }

    // -----------------------------------------------------------------------
    // Penalty from the prior
    // -----------------------------------------------------------------------

    #[test]
    fn lambda_of_log_e_prior_is_sigma2_doubled() {
        // (1−p)/p = e  ⇔  p = 1/(1+e); then λ = 2σ²·ln e = 2σ².
        let p_a = 1.0 / (1.0 + std::f64::consts::E);
        let lambda = lambda_from_prior(0.5, p_a).unwrap();
        assert!((lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_vanishes_toward_symmetric_prior() {
        let lambda = lambda_from_prior(1.0, 0.499_999).unwrap();
        assert!(lambda > 0.0 && lambda < 1e-5);
    }

    #[test]
    fn lambda_at_one_sixth_prior() {
        // K/M = 5/30: λ = 2·ln 5.
        let lambda = lambda_from_prior(1.0, 1.0 / 6.0).unwrap();
        assert!((lambda - 2.0 * 5.0f64.ln()).abs() < 1e-15);
        assert!((lambda - 3.218_875_824_868_200_6).abs() < 1e-12);
    }

    #[test]
    fn lambda_rejects_bad_arguments() {
        assert!(matches!(
            lambda_from_prior(0.0, 0.2),
            Err(TrellisError::InvalidNoiseVariance { .. })
        ));
        assert!(matches!(
            lambda_from_prior(-1.0, 0.2),
            Err(TrellisError::InvalidNoiseVariance { .. })
        ));
        assert!(matches!(
            lambda_from_prior(1.0, 0.5),
            Err(TrellisError::InvalidPrior { .. })
        ));
        assert!(matches!(
            lambda_from_prior(1.0, 0.0),
            Err(TrellisError::InvalidPrior { .. })
        ));
        assert!(matches!(
            lambda_from_prior(1.0, -0.1),
            Err(TrellisError::InvalidPrior { .. })
        ));
    }

    // -----------------------------------------------------------------------
    // Quadratic form construction
    // -----------------------------------------------------------------------

    #[test]
    fn zero_channel_annihilates_the_form() {
        let mut r = rng(21);
        let model = TrainingModel::new(random_pm1(3, &mut r), 6).unwrap();
        let y = random_vec(model.observation_len(), &mut r);
        let q = compute_quadratics(&model, &vec![0.0; 6], &y, 1.0);
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(q.entry(i, j), 0.0);
            }
            assert_eq!(q.z()[i], 0.0);
        }
    }

    #[test]
    fn single_tap_training_gives_diagonal_form() {
        let mut r = rng(22);
        let model = TrainingModel::new(vec![1.0], 4).unwrap();
        let h_hat = random_vec(4, &mut r);
        let y = random_vec(4, &mut r);
        let q = compute_quadratics(&model, &h_hat, &y, 0.3);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { h_hat[i] * h_hat[i] } else { 0.0 };
                assert!((q.entry(i, j) - want).abs() < 1e-15);
            }
            assert!((q.z()[i] - h_hat[i] * y[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn banded_form_matches_dense_product() {
        let mut r = rng(23);
        let model = TrainingModel::new(random_vec(3, &mut r), 6).unwrap();
        let h_hat = random_vec(6, &mut r);
        let y = random_vec(model.observation_len(), &mut r);
        let q = compute_quadratics(&model, &h_hat, &y, 0.7);

        // Dense oracle: column-scale U by ĥ, then form U_ĥᵀU_ĥ and U_ĥᵀy.
        let n = model.observation_len();
        let u_h = Matrix::from_fn(n, 6, |row, col| model.matrix().get(row, col) * h_hat[col]);
        for i in 0..6 {
            for j in 0..6 {
                let mut want = 0.0;
                for row in 0..n {
                    want += u_h.get(row, i) * u_h.get(row, j);
                }
                assert!(
                    (q.entry(i, j) - want).abs() < 1e-12,
                    "X[{}][{}] = {} vs dense {}",
                    i,
                    j,
                    q.entry(i, j),
                    want
                );
            }
            let mut want_z = 0.0;
            for row in 0..n {
                want_z += u_h.get(row, i) * y[row];
            }
            assert!((q.z()[i] - want_z).abs() < 1e-12);
        }
        let want_energy: f64 = y.iter().map(|v| v * v).sum();
        assert_eq!(q.y_energy(), want_energy);
    }

    #[test]
    fn form_is_banded_and_symmetric_exactly() {
        let mut r = rng(24);
        let (_, q) = random_instance(9, 3, &mut r);
        for i in 0..9usize {
            for j in 0..9usize {
                if i.abs_diff(j) >= 3 {
                    assert_eq!(q.entry(i, j), 0.0);
                }
                assert_eq!(q.entry(i, j).to_bits(), q.entry(j, i).to_bits());
            }
        }
    }

    // -----------------------------------------------------------------------
    // Local costs and the section decomposition
    // -----------------------------------------------------------------------

    #[test]
    fn inactive_bit_costs_nothing() {
        let mut r = rng(25);
        let (_, q) = random_instance(6, 3, &mut r);
        for i in 0..6 {
            let state = TrellisState::new(0, i, 3, 6).unwrap();
            assert_eq!(local_cost(&q, i, false, state), 0.0);
        }
    }

    #[test]
    fn first_section_has_no_neighbor_terms() {
        let mut r = rng(26);
        let (_, q) = random_instance(6, 3, &mut r);
        let got = local_cost(&q, 0, true, TrellisState::initial());
        let want = q.entry(0, 0) - 2.0 * q.z()[0] + q.lambda();
        assert_eq!(got, want);
    }

    #[test]
    fn section_costs_sum_to_the_quadratic_form() {
        let mut r = rng(27);
        for trial in 0..20 {
            let (_, q) = random_instance(6, 3, &mut r);
            let b: Vec<bool> = (0..6).map(|_| r.random()).collect();
            let mut total = 0.0;
            let mut state = TrellisState::initial();
            for i in 0..6 {
                total += local_cost(&q, i, b[i], state);
                state = state.advance(b[i], 3);
            }
            let want = dense_cost(&q, &b);
            assert!(
                (total - want).abs() < 1e-10,
                "trial {}: sectioned {} vs dense {}",
                trial,
                total,
                want
            );
            // The pairwise evaluator must agree with both routes.
            assert!((support_cost(&q, &b) - want).abs() < 1e-10);
        }
    }

    // -----------------------------------------------------------------------
    // State packing
    // -----------------------------------------------------------------------

    #[test]
    fn advance_shifts_recent_bit_into_the_bottom() {
        let s0 = TrellisState::initial();
        let s1 = s0.advance(true, 4); // window (b0) = 0b001
        assert_eq!(s1.bits(), 0b001);
        assert_eq!(s1.stage(), 1);
        let s2 = s1.advance(false, 4); // window (b1, b0) = 0b010
        assert_eq!(s2.bits(), 0b010);
        let s3 = s2.advance(true, 4); // window (b2, b1, b0) = 0b101
        assert_eq!(s3.bits(), 0b101);
        let s4 = s3.advance(true, 4); // b0 falls out of the window
        assert_eq!(s4.bits(), 0b011);
        assert!(s4.previous_bit(1));
        assert!(s4.previous_bit(2));
        assert!(!s4.previous_bit(3));
    }

    #[test]
    fn degenerate_width_stays_in_the_single_state() {
        let s = TrellisState::initial().advance(true, 1).advance(false, 1);
        assert_eq!(s.bits(), 0);
        assert_eq!(s.stage(), 2);
    }

    #[test]
    fn boundary_states_reject_bits_before_the_first_section() {
        // Stage 1 with L=4: only the previous-section bit may be set.
        assert!(TrellisState::new(0b001, 1, 4, 8).is_ok());
        assert!(matches!(
            TrellisState::new(0b010, 1, 4, 8),
            Err(TrellisError::IllegalState { .. })
        ));
    }

    #[test]
    fn tail_states_reject_bits_past_the_last_section() {
        // Stage M+1 with L=4: the most recent window slot refers to section M.
        assert!(TrellisState::new(0b110, 9, 4, 8).is_ok());
        assert!(matches!(
            TrellisState::new(0b001, 9, 4, 8),
            Err(TrellisError::IllegalState { .. })
        ));
        assert!(matches!(
            TrellisState::new(0b000, 13, 4, 8),
            Err(TrellisError::IllegalState { .. })
        ));
    }

    // -----------------------------------------------------------------------
    // Detection
    // -----------------------------------------------------------------------

    #[test]
    fn zero_correlation_with_positive_penalty_selects_nothing() {
        let mut r = rng(28);
        let model = TrainingModel::new(random_pm1(3, &mut r), 7).unwrap();
        let h_hat = random_vec(7, &mut r);
        let y = vec![0.0; model.observation_len()];
        let q = compute_quadratics(&model, &h_hat, &y, 0.7);
        let run = map_detect_trellis(&q, 7);
        assert_eq!(run.best_support(), &[false; 7]);
        assert_eq!(run.best_cost(), 0.0);
    }

    #[test]
    fn single_bit_closed_form() {
        // M = 1, L = 1: choose b = 1 exactly when X00 − 2z0 + λ < 0.
        let x = Matrix::from_fn(1, 1, |_, _| 1.0);
        let active = QuadraticForm::from_dense(&x, &[2.0], 0.5, 0.0, 1);
        let run = map_detect_trellis(&active, 1);
        assert_eq!(run.best_support(), &[true]);
        assert!((run.best_cost() - (1.0 - 4.0 + 0.5)).abs() < 1e-15);

        let idle = QuadraticForm::from_dense(&x, &[0.1], 0.5, 0.0, 1);
        let run = map_detect_trellis(&idle, 1);
        assert_eq!(run.best_support(), &[false]);
        assert_eq!(run.best_cost(), 0.0);

        let (support, cost) = map_detect_bruteforce(&active, 1).unwrap();
        assert_eq!(support, vec![true]);
        assert!((cost - run_cost(&active)).abs() < 1e-15);
    }

    fn run_cost(q: &QuadraticForm) -> f64 {
        map_detect_trellis(q, q.m()).best_cost()
    }

    #[test]
    fn three_bit_hand_enumeration() {
        // X = I, z = (1,0,0), λ = 1/2: activating bit 0 scores 1 − 2 + 0.5.
        let q = QuadraticForm::from_dense(&Matrix::identity(3), &[1.0, 0.0, 0.0], 0.5, 0.0, 1);
        let (support, cost) = map_detect_bruteforce(&q, 3).unwrap();
        assert_eq!(support, vec![true, false, false]);
        assert!((cost - (-0.5)).abs() < 1e-15);
        let run = map_detect_trellis(&q, 3);
        assert_eq!(run.best_support(), &support[..]);
        assert!((run.best_cost() - cost).abs() < 1e-15);
    }

    #[test]
    fn exact_ties_resolve_to_the_lexicographically_smaller_support() {
        // λ = 1 makes the supports {} and {0} cost exactly 0 each; both
        // searches must settle on the empty one.
        let q = QuadraticForm::from_dense(&Matrix::identity(3), &[1.0, 0.0, 0.0], 1.0, 0.0, 1);
        let (support, cost) = map_detect_bruteforce(&q, 3).unwrap();
        assert_eq!(support, vec![false, false, false]);
        assert_eq!(cost, 0.0);
        let run = map_detect_trellis(&q, 3);
        assert_eq!(run.best_support(), &support[..]);
        assert_eq!(run.best_cost(), 0.0);
    }

    #[test]
    fn everything_tied_returns_the_empty_support() {
        // ĥ = 0 and λ = 0 make every support cost exactly zero.
        let model = TrainingModel::new(vec![1.0, -1.0], 5).unwrap();
        let y = vec![1.0; model.observation_len()];
        let q = compute_quadratics(&model, &vec![0.0; 5], &y, 0.0);
        let run = map_detect_trellis(&q, 5);
        assert_eq!(run.best_support(), &[false; 5]);
        let (support, _) = map_detect_bruteforce(&q, 5).unwrap();
        assert_eq!(run.best_support(), &support[..]);
    }

    #[test]
    fn trellis_matches_bruteforce_on_random_instances() {
        let mut r = rng(29);
        for trial in 0..60 {
            let m = 6 + (trial % 7);
            let l = 2 + (trial % 3);
            let (_, q) = random_instance(m, l, &mut r);
            let run = map_detect_trellis(&q, m);
            let (support, cost) = map_detect_bruteforce(&q, m).unwrap();
            let scale = cost.abs().max(1.0);
            assert!(
                (run.best_cost() - cost).abs() <= 1e-9 * scale,
                "trial {}: trellis {} vs brute force {}",
                trial,
                run.best_cost(),
                cost
            );
            assert_eq!(run.best_support(), &support[..], "trial {}", trial);

            // Recomputing the winner's cost independently must reproduce it.
            let recomputed = support_cost(&q, run.best_support());
            assert!((recomputed - run.best_cost()).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn cost_reconciles_with_the_residual_objective() {
        let mut r = rng(30);
        for trial in 0..20 {
            let m = 6 + (trial % 5);
            let l = 2 + (trial % 3);
            let model = TrainingModel::new(random_pm1(l, &mut r), m).unwrap();
            let h_hat = random_vec(m, &mut r);
            let y = random_vec(model.observation_len(), &mut r);
            let lambda = lambda_from_prior(0.5, 0.2).unwrap();
            let q = compute_quadratics(&model, &h_hat, &y, lambda);
            let run = map_detect_trellis(&q, m);

            let masked: Vec<f64> = h_hat
                .iter()
                .zip(run.best_support())
                .map(|(h, &b)| if b { *h } else { 0.0 })
                .collect();
            let fit = model.matrix().matvec(&masked);
            let resid: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
            let k = run.best_support().iter().filter(|&&b| b).count() as f64;
            let lhs = run.best_cost() + q.y_energy();
            let rhs = resid + lambda * k;
            assert!(
                (lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0),
                "trial {}: {} vs {}",
                trial,
                lhs,
                rhs
            );
        }
    }

    #[test]
    fn tail_shortcut_is_equivalent_to_the_explicit_tail() {
        let mut r = rng(31);
        let (_, q) = random_instance(9, 3, &mut r);
        let run = map_detect_trellis(&q, 9);
        // Shortcut: the optimum is already decided at stage M — the tail only
        // merges states without adding weight.
        let mut best = f64::INFINITY;
        let mut best_state = 0u32;
        for s in 0..(1u32 << 2) {
            let w = run.state_weight(9, s);
            if w < best {
                best = w;
                best_state = s;
            }
        }
        assert_eq!(best, run.best_cost());
        assert_eq!(run.survivor(9, best_state).unwrap(), run.best_support());
    }

    #[test]
    fn survivors_carry_one_bit_per_decided_section() {
        let mut r = rng(32);
        let (_, q) = random_instance(8, 3, &mut r);
        let run = map_detect_trellis(&q, 8);
        for stage in 0..=8 + 3 {
            for s in 0..4u32 {
                if let Some(path) = run.survivor(stage, s) {
                    assert_eq!(path.len(), stage.min(8), "stage {}, state {}", stage, s);
                }
            }
        }
        // Unreachable boundary states have no survivor.
        assert_eq!(run.state_weight(0, 0), 0.0);
        assert_eq!(run.state_weight(0, 1), f64::INFINITY);
        assert!(run.survivor(0, 1).is_none());
    }

    #[test]
    fn accumulation_count_is_m_times_two_to_the_l() {
        let mut r = rng(33);
        for &(m, l) in &[(6usize, 2usize), (12, 2), (8, 3), (8, 4), (16, 4)] {
            let (_, q) = random_instance(m, l, &mut r);
            let run = map_detect_trellis(&q, m);
            assert_eq!(run.op_count(), (m as u64) << l, "M={}, L={}", m, l);
        }
    }

    #[test]
    fn growing_penalty_never_grows_the_support() {
        let mut r = rng(34);
        let model = TrainingModel::new(random_pm1(3, &mut r), 10).unwrap();
        let h_hat = random_vec(10, &mut r);
        let y = random_vec(model.observation_len(), &mut r);
        let mut last = usize::MAX;
        for step in 0..12 {
            let lambda = 0.5 * step as f64;
            let q = compute_quadratics(&model, &h_hat, &y, lambda);
            let run = map_detect_trellis(&q, 10);
            let size = run.best_support().iter().filter(|&&b| b).count();
            assert!(size <= last, "support grew from {} to {} at λ={}", last, size, lambda);
            last = size;
        }
    }

    #[test]
    fn bruteforce_refuses_large_memories() {
        let mut r = rng(35);
        let (_, q) = random_instance(21, 2, &mut r);
        assert!(matches!(
            map_detect_bruteforce(&q, 21),
            Err(TrellisError::MemoryTooLargeForBruteforce { memory: 21 })
        ));
    }
}
