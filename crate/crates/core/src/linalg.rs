//! Small dense linear-algebra helpers.

use crate::error::{Error, Result};
use crate::Matrix;

/// Smallest `|det|` treated as nonsingular.
pub const SINGULAR_DET: f64 = 1e-300;

/// LU-based log-determinant and inverse of a square matrix.
#[derive(Clone, Debug)]
pub struct Factored {
    pub log_abs_det: f64,
    pub inverse: Matrix,
}

/// `ln |det m|` summed from the pivots of a partially pivoted LU.
///
/// Fails with [`Error::Singular`] when `|det m| < 1e-300` or a pivot is zero.
pub fn log_abs_det(m: &Matrix) -> Result<f64> {
    let lu = m.clone().lu();
    pivots_log_abs_det(&lu.u())
}

fn pivots_log_abs_det(u: &Matrix) -> Result<f64> {
    let log_abs_det: f64 = u.diagonal().iter().map(|p| p.abs().ln()).sum();
    if !log_abs_det.is_finite() || log_abs_det < SINGULAR_DET.ln() {
        // NaN and +inf both mean the factorization broke down.
        let reported = if log_abs_det.is_nan() {
            f64::NEG_INFINITY
        } else {
            log_abs_det
        };
        return Err(Error::Singular {
            log_abs_det: reported,
        });
    }
    Ok(log_abs_det)
}

/// Log-determinant and inverse from one factorization.
pub fn factor(m: &Matrix) -> Result<Factored> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "square matrix",
            expected: (m.nrows(), m.nrows()),
            found: m.shape(),
        });
    }
    let lu = m.clone().lu();
    let log_abs_det = pivots_log_abs_det(&lu.u())?;
    let inverse = lu.try_inverse().ok_or(Error::Singular { log_abs_det })?;
    if inverse.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { log_abs_det });
    }
    Ok(Factored {
        log_abs_det,
        inverse,
    })
}

/// `sigma_min / sigma_max`, or 0 for an empty or zero matrix.
pub fn reciprocal_condition(m: &Matrix) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    if max <= 0.0 || !max.is_finite() {
        return 0.0;
    }
    sv.min() / max
}
