//! Sparse channel estimation toolkit.
//!
//! A sparse channel has an impulse response of length `M` with only `K << M`
//! non-zero taps. Given a known training sequence of length `L` and the noisy
//! channel output `y = U h + n`, the estimators in this crate recover both the
//! tap values `h` and the support indicator `b` (which taps are non-zero).
//!
//! The crate is organized in four layers:
//!
//! - [`numerics`]: Toeplitz training-matrix construction and Householder-QR
//!   least squares, the linear-algebra floor everything else stands on.
//! - [`trellis`]: exact MAP detection of the support vector by a min-sum
//!   (Viterbi-style) recursion over `2^(L-1)` states, plus a brute-force
//!   oracle for verification.
//! - [`estimators`]: the OMAPFG alternating-minimization estimator (masked
//!   least squares alternated with exact MAP support detection) and the
//!   LSE / genie-aided SLSE / OMP baselines.
//! - [`simkit`]: seeded synthetic experiments, error metrics, Cramér-Rao
//!   bounds, and the Monte Carlo driver producing MSE-vs-SNR tables.

pub mod estimators;
pub mod numerics;
pub mod simkit;
pub mod trellis;

pub use estimators::{
    lse_estimate, omapfg_estimate, omp_estimate, slse_genie, EstimatorError, EstimatorOutput,
    OmapfgConfig, SparseChannel,
};
pub use numerics::{
    least_squares, masked_least_squares, trace_inverse_gram, Matrix, NumericsError, TrainingModel,
};
pub use simkit::{
    awgn, crb_s, crb_us, draw_instance, generate_sparse_channel, generate_training_sequence,
    run_monte_carlo, sigma_from_snr, Algorithm, ExperimentConfig, ResultRecord, SimError,
    SimInstance,
};
pub use trellis::{
    compute_quadratics, lambda_from_prior, local_cost, map_detect_bruteforce, map_detect_trellis,
    support_cost, QuadraticForm, TrellisError, TrellisRun, TrellisState,
};
