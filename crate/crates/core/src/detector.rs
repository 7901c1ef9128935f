//! Pilot-free detection and its ground-truth scoring.
//!
//! The detector sees only `Y`. It estimates `B`, applies it to recover the
//! symbol streams, and, when the true symbols are known, scores the result
//! by the cosine between every true and every recovered stream. Recovered
//! streams come back in arbitrary order and sign, so scoring matches them to
//! users with an optimal assignment on `|rho|`.

use rand::Rng;
use serde::Serialize;

use crate::assignment::max_score_assignment;
use crate::error::{Error, Result};
use crate::likelihood::UnmixingMatrix;
use crate::optimizer::{run_optimization, OptimizerConfig, Trajectory};
use crate::signal_model::{ReceivedBlock, SymbolBlock};
use crate::{matrix_rows, Matrix};

/// `rho[(i, j)]`: cosine between true stream `i` and recovered stream `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix(Matrix);

impl CorrelationMatrix {
    /// Wraps a square matrix of cosines, all in `[-1, 1]` up to rounding.
    pub fn new(entries: Matrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                context: "correlation matrix",
                expected: (entries.nrows(), entries.nrows()),
                found: entries.shape(),
            });
        }
        if let Some(v) = entries.iter().find(|v| v.is_nan() || v.abs() > 1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "correlation entry {v} outside [-1, 1]"
            )));
        }
        Ok(CorrelationMatrix(entries))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn users(&self) -> usize {
        self.0.nrows()
    }

    pub fn abs(&self) -> Matrix {
        self.0.abs()
    }

    /// `|rho|` as row-major CSV without a header.
    pub fn abs_csv(&self) -> String {
        crate::matrix_csv(&self.abs())
    }
}

/// Assignment of recovered streams to users.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Matching {
    /// `permutation[i]`: recovered stream matched to user `i`.
    pub permutation: Vec<usize>,
    /// Sign of `rho[(i, permutation[i])]`, zero counted as positive.
    pub signs: Vec<i8>,
    /// `|rho[(i, permutation[i])]|`.
    pub matched_correlations: Vec<f64>,
}

impl Matching {
    pub fn min(&self) -> f64 {
        self.matched_correlations
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.matched_correlations
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.matched_correlations.iter().sum::<f64>() / self.matched_correlations.len() as f64
    }

    /// Mean matched correlation of the users of each cell.
    pub fn per_cell_means(&self, cell_of_row: &[usize]) -> Vec<f64> {
        let cells = cell_of_row.iter().copied().max().map_or(0, |c| c + 1);
        let mut sums = vec![0.0; cells];
        let mut counts = vec![0usize; cells];
        for (&cell, &c) in cell_of_row.iter().zip(&self.matched_correlations) {
            sums[cell] += c;
            counts[cell] += 1;
        }
        sums.iter()
            .zip(&counts)
            .map(|(s, &n)| if n == 0 { f64::NAN } else { s / n as f64 })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthMatch {
    pub rho: CorrelationMatrix,
    pub matching: Matching,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionResult {
    pub b_hat: UnmixingMatrix,
    pub x_hat: Matrix,
    pub trajectory: Trajectory,
    /// Present only when the true symbols were supplied.
    pub truth: Option<TruthMatch>,
}

/// Serializable digest of a detection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionReport {
    pub b_hat: Vec<Vec<f64>>,
    pub permutation: Option<Vec<usize>>,
    pub signs: Option<Vec<i8>>,
    pub matched_correlations: Option<Vec<f64>>,
    pub min_matched: Option<f64>,
    pub mean_matched: Option<f64>,
    pub max_matched: Option<f64>,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub restarts: usize,
}

impl DetectionResult {
    pub fn report(&self) -> DetectionReport {
        let m = self.truth.as_ref().map(|t| &t.matching);
        DetectionReport {
            b_hat: matrix_rows(self.b_hat.as_matrix()),
            permutation: m.map(|m| m.permutation.clone()),
            signs: m.map(|m| m.signs.clone()),
            matched_correlations: m.map(|m| m.matched_correlations.clone()),
            min_matched: m.map(Matching::min),
            mean_matched: m.map(Matching::mean),
            max_matched: m.map(Matching::max),
            initial_objective: self.trajectory.initial_objective,
            final_objective: self.trajectory.final_objective(),
            restarts: self.trajectory.restarts,
        }
    }
}

/// `X_hat = B_hat Y`.
pub fn recover_symbols(b_hat: &UnmixingMatrix, y: &ReceivedBlock) -> Result<Matrix> {
    let b = b_hat.as_matrix();
    if b.ncols() != y.antennas() {
        return Err(Error::DimensionMismatch {
            context: "B_hat Y product",
            expected: (b.ncols(), y.block_len()),
            found: y.entries.shape(),
        });
    }
    Ok(b * &y.entries)
}

/// Uncentered cosine between each row of `x` and each row of `x_hat`.
pub fn correlation_matrix(x: &SymbolBlock, x_hat: &Matrix) -> Result<CorrelationMatrix> {
    let x = &x.entries;
    if x.shape() != x_hat.shape() {
        return Err(Error::DimensionMismatch {
            context: "correlation inputs",
            expected: x.shape(),
            found: x_hat.shape(),
        });
    }
    let norms = |m: &Matrix, which: &'static str| -> Result<Vec<f64>> {
        m.row_iter()
            .enumerate()
            .map(|(row, r)| {
                let n = r.norm();
                if n > 0.0 {
                    Ok(n)
                } else {
                    Err(Error::ZeroNormRow { which, row })
                }
            })
            .collect()
    };
    let nx = norms(x, "X")?;
    let nh = norms(x_hat, "X_hat")?;
    let mut rho = x * x_hat.transpose();
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            rho[(i, j)] /= nx[i] * nh[j];
        }
    }
    Ok(CorrelationMatrix(rho))
}

/// Optimal user-to-stream assignment maximizing `sum |rho[(i, pi(i))]|`.
pub fn match_permutation(rho: &CorrelationMatrix) -> Matching {
    let m = rho.as_matrix();
    let permutation = max_score_assignment(&m.abs());
    let signs = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| if m[(i, j)] < 0.0 { -1 } else { 1 })
        .collect();
    let matched_correlations = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| m[(i, j)].abs())
        .collect();
    Matching {
        permutation,
        signs,
        matched_correlations,
    }
}

/// Scores recovered streams against the truth.
pub fn score(x: &SymbolBlock, x_hat: &Matrix) -> Result<TruthMatch> {
    let rho = correlation_matrix(x, x_hat)?;
    let matching = match_permutation(&rho);
    Ok(TruthMatch { rho, matching })
}

/// Estimates `B` from `y` alone, recovers the streams and, if `truth` is
/// given, scores them.
pub fn detect<R: Rng + ?Sized>(
    y: &ReceivedBlock,
    config: &OptimizerConfig,
    truth: Option<&SymbolBlock>,
    rng: &mut R,
) -> Result<DetectionResult> {
    let (b_hat, trajectory) = run_optimization(y, config, rng)?;
    let x_hat = recover_symbols(&b_hat, y)?;
    let truth = truth.map(|x| score(x, &x_hat)).transpose()?;
    Ok(DetectionResult {
        b_hat,
        x_hat,
        trajectory,
        truth,
    })
}
