//! Dense real linear algebra for the channel estimators.
//!
//! Provides the Toeplitz training-matrix construction, full and column-masked
//! least squares via Householder QR, and the Gram-trace utility behind the
//! Cramér-Rao bounds. Everything is dense row-major `f64`; channel memories
//! at desk scale stay in the low hundreds, so no sparse formats are needed.

use std::fmt;

/// Rank-deficiency threshold on the QR triangular factor: the solve is
/// refused when `min |R[k][k]| / max |R[k][k]|` falls below this value.
pub const RANK_RATIO_THRESHOLD: f64 = 1e-10;

/// Errors from training-matrix construction and the least-squares kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum NumericsError {
    /// The training sequence must contain at least one symbol.
    EmptyTrainingSequence,
    /// The model requires the channel memory to be at least the training length.
    MemoryShorterThanTraining { memory: usize, training_len: usize },
    /// The coefficient matrix is (numerically) rank deficient.
    RankDeficient { diag_ratio: f64 },
    /// The Gram matrix `A^T A` is numerically singular.
    SingularGram,
}

impl fmt::Display for NumericsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericsError::EmptyTrainingSequence => {
                write!(f, "training sequence must be non-empty")
            }
            NumericsError::MemoryShorterThanTraining {
                memory,
                training_len,
            } => write!(
                f,
                "channel memory {} is shorter than the training sequence length {}",
                memory, training_len
            ),
            NumericsError::RankDeficient { diag_ratio } => write!(
                f,
                "matrix is numerically rank deficient (diag ratio {:.3e} < {:.0e})",
                diag_ratio, RANK_RATIO_THRESHOLD
            ),
            NumericsError::SingularGram => write!(f, "Gram matrix is numerically singular"),
        }
    }
}

impl std::error::Error for NumericsError {}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build a matrix by evaluating `f(row, col)` at every entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    /// `A x` for a vector `x` of length `cols`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[r] = acc;
        }
        y
    }

    /// `A^T y` for a vector `y` of length `rows`.
    pub fn transpose_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "transpose_matvec dimension mismatch");
        let mut x = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let yr = y[r];
            for (c, a) in row.iter().enumerate() {
                x[c] += a * yr;
            }
        }
        x
    }

    /// New matrix made of the selected columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, cols.len());
        for (k, &c) in cols.iter().enumerate() {
            assert!(c < self.cols, "column index out of range");
            for r in 0..self.rows {
                m.set(r, k, self.get(r, c));
            }
        }
        m
    }
}

/// Training model: the sequence `u`, channel memory `M`, and the Toeplitz
/// convolution matrix `U` whose column `i` is the `i`-th down-shift of
/// `[u(0), ..., u(L-1), 0, ..., 0]`.
///
/// Invariants: `N = L + M - 1`, `L <= M`, and entrywise
/// `U[r][c] = u[r-c]` when `0 <= r-c <= L-1`, else `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingModel {
    u: Vec<f64>,
    memory: usize,
    matrix: Matrix,
}

impl TrainingModel {
    /// Build the training matrix for sequence `u` and channel memory `memory`.
    ///
    /// Rejects an empty sequence and `memory < u.len()` (the model assumes
    /// the training sequence is no longer than the channel memory).
    pub fn new(u: Vec<f64>, memory: usize) -> Result<Self, NumericsError> {
        let training_len = u.len();
        if training_len == 0 {
            return Err(NumericsError::EmptyTrainingSequence);
        }
        if memory < training_len {
            return Err(NumericsError::MemoryShorterThanTraining {
                memory,
                training_len,
            });
        }
        let n = training_len + memory - 1;
        let matrix = Matrix::from_fn(n, memory, |r, c| {
            if r >= c && r - c < training_len {
                u[r - c]
            } else {
                0.0
            }
        });
        Ok(TrainingModel { u, memory, matrix })
    }

    /// The training sequence `u`.
    pub fn training(&self) -> &[f64] {
        &self.u
    }

    /// Training sequence length `L`.
    pub fn training_len(&self) -> usize {
        self.u.len()
    }

    /// Channel memory `M`.
    pub fn memory(&self) -> usize {
        self.memory
    }

    /// Observation length `N = L + M - 1`.
    pub fn observation_len(&self) -> usize {
        self.u.len() + self.memory - 1
    }

    /// The `N x M` training matrix `U`.
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

/// Householder QR of an `n x p` matrix with `p <= n`.
///
/// Returns the `p x p` upper-triangular factor `R`; if `rhs` is given it is
/// overwritten with `Q^T rhs` (so its leading `p` entries are the reduced
/// right-hand side).
fn householder_qr(a: &Matrix, mut rhs: Option<&mut Vec<f64>>) -> Matrix {
    let n = a.rows();
    let p = a.cols();
    assert!(p <= n, "QR requires at least as many rows as columns");
    if let Some(ref y) = rhs {
        assert_eq!(y.len(), n, "right-hand side length mismatch");
    }

    let mut work = a.clone();
    let mut v = vec![0.0; n];
    for k in 0..p {
        let mut normsq = 0.0;
        for i in k..n {
            let x = work.get(i, k);
            normsq += x * x;
        }
        let norm = normsq.sqrt();
        if norm == 0.0 {
            // Zero column below the diagonal; leave R[k][k] = 0 for the rank check.
            continue;
        }
        let alpha = if work.get(k, k) >= 0.0 { -norm } else { norm };
        for i in k..n {
            v[i] = work.get(i, k);
        }
        v[k] -= alpha;
        let mut beta = 0.0;
        for i in k..n {
            beta += v[i] * v[i];
        }
        // beta = 2 * norm * (norm + |x_k|) > 0 here.
        for j in (k + 1)..p {
            let mut s = 0.0;
            for i in k..n {
                s += v[i] * work.get(i, j);
            }
            let t = 2.0 * s / beta;
            for i in k..n {
                work.set(i, j, work.get(i, j) - t * v[i]);
            }
        }
        if let Some(ref mut y) = rhs {
            let mut s = 0.0;
            for i in k..n {
                s += v[i] * y[i];
            }
            let t = 2.0 * s / beta;
            for i in k..n {
                y[i] -= t * v[i];
            }
        }
        work.set(k, k, alpha);
        for i in (k + 1)..n {
            work.set(i, k, 0.0);
        }
    }

    Matrix::from_fn(p, p, |r, c| if c >= r { work.get(r, c) } else { 0.0 })
}

/// Ratio of smallest to largest diagonal magnitude of a triangular factor.
fn diag_ratio(r: &Matrix) -> f64 {
    let p = r.cols();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for k in 0..p {
        let d = r.get(k, k).abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Solve `R x = b` for upper-triangular `R`.
fn back_substitute(r: &Matrix, b: &[f64]) -> Vec<f64> {
    let p = r.cols();
    assert!(b.len() >= p);
    let mut x = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = b[k];
        for j in (k + 1)..p {
            s -= r.get(k, j) * x[j];
        }
        x[k] = s / r.get(k, k);
    }
    x
}

/// Least-squares solution of `min_x || y - A x ||_2` by Householder QR.
///
/// Requires `A` to be tall (`cols <= rows`) with full column rank; a
/// numerically rank-deficient `A` is reported as
/// [`NumericsError::RankDeficient`] rather than solved badly.
pub fn least_squares(a: &Matrix, y: &[f64]) -> Result<Vec<f64>, NumericsError> {
    assert_eq!(y.len(), a.rows(), "observation length mismatch");
    assert!(a.cols() >= 1, "least squares needs at least one column");
    let mut qty = y.to_vec();
    let r = householder_qr(a, Some(&mut qty));
    let ratio = diag_ratio(&r);
    if ratio < RANK_RATIO_THRESHOLD {
        return Err(NumericsError::RankDeficient { diag_ratio: ratio });
    }
    Ok(back_substitute(&r, &qty[..a.cols()]))
}

/// Least squares restricted to the columns selected by the binary mask `b`.
///
/// Returns a full-length estimate that is exactly zero off the mask. An
/// all-zero mask yields the all-zero estimate so the alternating loop can
/// pass through a transiently empty support.
pub fn masked_least_squares(
    model: &TrainingModel,
    mask: &[bool],
    y: &[f64],
) -> Result<Vec<f64>, NumericsError> {
    assert_eq!(mask.len(), model.memory(), "mask length mismatch");
    assert_eq!(y.len(), model.observation_len(), "observation length mismatch");
    let support: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if support.is_empty() {
        return Ok(vec![0.0; model.memory()]);
    }
    let sub = model.matrix().select_columns(&support);
    let x = least_squares(&sub, y)?;
    let mut h = vec![0.0; model.memory()];
    for (k, &i) in support.iter().enumerate() {
        h[i] = x[k];
    }
    Ok(h)
}

/// `Tr{(A^T A)^{-1}}` for a tall full-column-rank `A`.
///
/// Computed as `||R^{-1}||_F^2` from the QR factor, column by column.
pub fn trace_inverse_gram(a: &Matrix) -> Result<f64, NumericsError> {
    assert!(a.cols() >= 1 && a.cols() <= a.rows());
    let r = householder_qr(a, None);
    if diag_ratio(&r) < RANK_RATIO_THRESHOLD {
        return Err(NumericsError::SingularGram);
    }
    let p = a.cols();
    let mut trace = 0.0;
    let mut e = vec![0.0; p];
    for j in 0..p {
        e[j] = 1.0;
        let col = back_substitute(&r, &e);
        e[j] = 0.0;
        trace += col.iter().map(|x| x * x).sum::<f64>();
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn random_pm1(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect()
    }

    /// Test-only oracle: solve the normal equations (A^T A) x = A^T y by
    /// Gauss-Jordan elimination with partial pivoting.
    fn normal_equation_solve(a: &Matrix, y: &[f64]) -> Vec<f64> {
        let p = a.cols();
        let mut gram = vec![vec![0.0; p + 1]; p];
        for i in 0..p {
            for j in 0..p {
                let mut s = 0.0;
                for r in 0..a.rows() {
                    s += a.get(r, i) * a.get(r, j);
                }
                gram[i][j] = s;
            }
            let mut s = 0.0;
            for r in 0..a.rows() {
                s += a.get(r, i) * y[r];
            }
            gram[i][p] = s;
        }
        for col in 0..p {
            let pivot = (col..p)
                .max_by(|&i, &j| gram[i][col].abs().total_cmp(&gram[j][col].abs()))
                .unwrap();
            gram.swap(col, pivot);
            let d = gram[col][col];
            for v in gram[col].iter_mut() {
                *v /= d;
            }
            for row in 0..p {
                if row != col {
                    let f = gram[row][col];
                    for j in 0..=p {
                        gram[row][j] -= f * gram[col][j];
                    }
                }
            }
        }
        (0..p).map(|i| gram[i][p]).collect()
    }

    /// Test-only oracle: invert a small symmetric matrix by Gauss-Jordan
    /// and return its trace.
    fn trace_inverse_oracle(a: &Matrix) -> f64 {
        let p = a.cols();
        let mut aug = vec![vec![0.0; 2 * p]; p];
        for i in 0..p {
            for j in 0..p {
                let mut s = 0.0;
                for r in 0..a.rows() {
                    s += a.get(r, i) * a.get(r, j);
                }
                aug[i][j] = s;
            }
            aug[i][p + i] = 1.0;
        }
        for col in 0..p {
            let pivot = (col..p)
                .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
                .unwrap();
            aug.swap(col, pivot);
            let d = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= d;
            }
            for row in 0..p {
                if row != col {
                    let f = aug[row][col];
                    for j in 0..2 * p {
                        aug[row][j] -= f * aug[col][j];
                    }
                }
            }
        }
        (0..p).map(|i| aug[i][p + i]).sum()
    }

    // -----------------------------------------------------------------------
    // Training matrix construction
    // -----------------------------------------------------------------------

    #[test]
    fn single_tap_training_is_identity() {
        let model = TrainingModel::new(vec![1.0], 3).unwrap();
        assert_eq!(model.observation_len(), 3);
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert_eq!(model.matrix().get(r, c), want);
            }
        }
    }

    #[test]
    fn two_tap_training_shift_structure() {
        let model = TrainingModel::new(vec![1.0, -1.0], 2).unwrap();
        let expect = [[1.0, 0.0], [-1.0, 1.0], [0.0, -1.0]];
        assert_eq!(model.observation_len(), 3);
        for r in 0..3 {
            for c in 0..2 {
                assert_eq!(model.matrix().get(r, c), expect[r][c]);
            }
        }
    }

    #[test]
    fn shift_structure_matches_entrywise_formula() {
        let mut rng = rng(11);
        let u = random_pm1(5, &mut rng);
        let model = TrainingModel::new(u.clone(), 30).unwrap();
        let n = model.observation_len();
        assert_eq!(n, 34);
        for r in 0..n {
            for c in 0..30 {
                let want = if r >= c && r - c < 5 { u[r - c] } else { 0.0 };
                assert_eq!(model.matrix().get(r, c), want, "entry ({}, {})", r, c);
            }
        }
    }

    #[test]
    fn rejects_empty_training_sequence() {
        assert_eq!(
            TrainingModel::new(vec![], 4).unwrap_err(),
            NumericsError::EmptyTrainingSequence
        );
    }

    #[test]
    fn rejects_memory_shorter_than_training() {
        assert_eq!(
            TrainingModel::new(vec![1.0, -1.0, 1.0], 2).unwrap_err(),
            NumericsError::MemoryShorterThanTraining {
                memory: 2,
                training_len: 3
            }
        );
    }

    // -----------------------------------------------------------------------
    // Least squares
    // -----------------------------------------------------------------------

    #[test]
    fn identity_system_returns_rhs() {
        let a = Matrix::identity(4);
        let y = vec![0.5, -1.25, 3.0, 0.0];
        let x = least_squares(&a, &y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn consistent_system_recovers_exactly() {
        let mut rng = rng(12);
        let a = random_matrix(8, 3, &mut rng);
        let x_true = random_vec(3, &mut rng);
        let y = a.matvec(&x_true);
        let x = least_squares(&a, &y).unwrap();
        for (got, want) in x.iter().zip(&x_true) {
            assert!((got - want).abs() < 1e-10, "{} vs {}", got, want);
        }
    }

    #[test]
    fn noisy_system_matches_normal_equation_oracle() {
        let mut rng = rng(13);
        let a = random_matrix(10, 4, &mut rng);
        let y = random_vec(10, &mut rng);
        let x = least_squares(&a, &y).unwrap();
        let oracle = normal_equation_solve(&a, &y);
        for (got, want) in x.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-9, "{} vs {}", got, want);
        }
    }

    #[test]
    fn duplicate_columns_reported_rank_deficient() {
        let mut rng = rng(14);
        let base = random_matrix(6, 2, &mut rng);
        let a = Matrix::from_fn(6, 3, |r, c| base.get(r, c.min(1)));
        match least_squares(&a, &vec![1.0; 6]) {
            Err(NumericsError::RankDeficient { diag_ratio }) => {
                assert!(diag_ratio < RANK_RATIO_THRESHOLD);
            }
            other => panic!("expected rank deficiency, got {:?}", other),
        }
    }

    // -----------------------------------------------------------------------
    // Masked least squares
    // -----------------------------------------------------------------------

    #[test]
    fn full_mask_equals_plain_least_squares() {
        let mut rng = rng(15);
        let u = random_pm1(3, &mut rng);
        let model = TrainingModel::new(u, 6).unwrap();
        let y = random_vec(model.observation_len(), &mut rng);
        let full = least_squares(model.matrix(), &y).unwrap();
        let masked = masked_least_squares(&model, &vec![true; 6], &y).unwrap();
        for (a, b) in masked.iter().zip(&full) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_mask_returns_zero_vector() {
        let mut rng = rng(16);
        let u = random_pm1(3, &mut rng);
        let model = TrainingModel::new(u, 6).unwrap();
        let y = random_vec(model.observation_len(), &mut rng);
        let h = masked_least_squares(&model, &vec![false; 6], &y).unwrap();
        assert_eq!(h, vec![0.0; 6]);
    }

    #[test]
    fn masked_solve_recovers_supported_channel() {
        let mut rng = rng(17);
        let u = random_pm1(4, &mut rng);
        let model = TrainingModel::new(u, 6).unwrap();
        let mut h_true = vec![0.0; 6];
        h_true[1] = 1.4;
        h_true[4] = -0.7;
        let y = model.matrix().matvec(&h_true);
        let mask: Vec<bool> = (0..6).map(|i| i == 1 || i == 4).collect();
        let h = masked_least_squares(&model, &mask, &y).unwrap();
        for i in 0..6 {
            if mask[i] {
                assert!((h[i] - h_true[i]).abs() < 1e-10);
            } else {
                assert_eq!(h[i], 0.0, "off-support entry must be exactly zero");
            }
        }
    }

    // -----------------------------------------------------------------------
    // Gram trace
    // -----------------------------------------------------------------------

    #[test]
    fn gram_trace_of_identity() {
        let a = Matrix::identity(5);
        assert!((trace_inverse_gram(&a).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn gram_trace_of_scaled_identity() {
        let mut a = Matrix::zeros(3, 3);
        for i in 0..3 {
            a.set(i, i, 2.0);
        }
        assert!((trace_inverse_gram(&a).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn gram_trace_matches_inversion_oracle() {
        let mut rng = rng(18);
        let a = random_matrix(8, 3, &mut rng);
        let got = trace_inverse_gram(&a).unwrap();
        let want = trace_inverse_oracle(&a);
        assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn singular_gram_detected() {
        let a = Matrix::zeros(4, 2);
        assert_eq!(trace_inverse_gram(&a).unwrap_err(), NumericsError::SingularGram);
    }

    // -----------------------------------------------------------------------
    // Properties
    // -----------------------------------------------------------------------

    proptest! {
        #[test]
        fn shift_structure_holds_for_all_entries(seed in 0u64..500, l in 1usize..6, extra in 0usize..8) {
            let mut r = rng(seed);
            let m = l + extra;
            let u = random_vec(l, &mut r);
            let model = TrainingModel::new(u.clone(), m).unwrap();
            for row in 0..model.observation_len() {
                for col in 0..m {
                    let want = if row >= col && row - col < l { u[row - col] } else { 0.0 };
                    prop_assert_eq!(model.matrix().get(row, col), want);
                }
            }
        }

        #[test]
        fn least_squares_is_optimal_and_orthogonal(seed in 0u64..300) {
            let mut r = rng(seed);
            let a = random_matrix(9, 4, &mut r);
            let y = random_vec(9, &mut r);
            let x = least_squares(&a, &y).unwrap();
            let fit = a.matvec(&x);
            let resid: Vec<f64> = y.iter().zip(&fit).map(|(yi, fi)| yi - fi).collect();
            let base: f64 = resid.iter().map(|v| v * v).sum();

            // Orthogonality of the residual to the column space.
            let aty = a.transpose_matvec(&y);
            let atr = a.transpose_matvec(&resid);
            let bound = 1e-8 * aty.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1e-12;
            for v in &atr {
                prop_assert!(v.abs() <= bound, "A^T r = {:e} exceeds {:e}", v, bound);
            }

            // No unit-scale perturbation improves the objective.
            for _ in 0..8 {
                let d = random_vec(4, &mut r);
                let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
                let fitp = a.matvec(&xp);
                let perturbed: f64 = y.iter().zip(&fitp).map(|(yi, fi)| (yi - fi) * (yi - fi)).sum();
                prop_assert!(perturbed >= base - 1e-9);
            }
        }

        #[test]
        fn masked_estimate_is_bitwise_zero_off_support(seed in 0u64..300, m in 2usize..9) {
            let mut r = rng(seed);
            let l = 1 + (seed as usize) % m.min(4);
            let u = random_pm1(l, &mut r);
            let model = TrainingModel::new(u, m).unwrap();
            let y = random_vec(model.observation_len(), &mut r);
            let mask: Vec<bool> = (0..m).map(|_| r.random::<bool>()).collect();
            if let Ok(h) = masked_least_squares(&model, &mask, &y) {
                for i in 0..m {
                    if !mask[i] {
                        prop_assert_eq!(h[i].to_bits(), 0.0f64.to_bits());
                    }
                }
            }
        }
    }
}
