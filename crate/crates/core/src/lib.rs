//! Pilot-free maximum-likelihood detection for multi-user uplinks.
//!
//! A base station with `n` antennas receives `Y = H X + Z` from `K = n`
//! users over a block of `T` channel uses during which the channel `H` is
//! constant and unknown. With independent non-Gaussian symbols the
//! likelihood of `Y` depends on `H` only through `B = H^-1`, so the
//! receiver can estimate `B` by maximizing the block log-likelihood and
//! recover every user's stream, up to ordering and sign, without pilots.
//!
//! Modules:
//! - [`signal_model`]: scenario configs, Laplacian symbols, channels and noise.
//! - [`likelihood`]: the block log-likelihood, its gradient and a
//!   finite-difference checker.
//! - [`optimizer`]: Adam / SGD ascent with step diagnostics.
//! - [`detector`]: end-to-end detection and correlation scoring.
//! - [`harness`]: seeded experiments, sweeps, gradient checks and artifacts.

pub mod assignment;
pub mod detector;
pub mod error;
pub mod harness;
pub mod likelihood;
pub mod linalg;
pub mod optimizer;
pub mod rng;
pub mod signal_model;

use std::fmt::Write as _;

pub use detector::{
    correlation_matrix, detect, match_permutation, recover_symbols, CorrelationMatrix,
    DetectionReport, DetectionResult, Matching, TruthMatch,
};
pub use error::{Error, Result};
pub use harness::{
    run_experiment, run_gradient_check, run_sweep, Emit, ExperimentConfig, ExperimentSummary,
    GradCheckReport,
};
pub use likelihood::{
    finite_difference_gradient, gradient_laplacian, log_likelihood_generic,
    log_likelihood_laplacian, LogDensity, UnmixingMatrix,
};
pub use optimizer::{
    adam_update, init_unmixing, run_optimization, sgd_update, AdamState, Method, Minibatch,
    OptimizerConfig, Trajectory, TrajectoryRecord,
};
pub use signal_model::{
    generate_channel, generate_symbols, sample_laplacian, synthesize_received, ChannelMatrix,
    ReceivedBlock, Scenario, ScenarioConfig, Snr, SymbolBlock,
};

/// Dense real matrix used for every block in the model.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Rows of `m` as nested vectors.
pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Row-major CSV, no header.
pub fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}
