//! Block log-likelihood of the unmixing matrix.
//!
//! With `X = B Y` and i.i.d. sources of density `f`, the log-likelihood of a
//! block of `T` received columns is
//!
//! ```text
//! L(B; Y) = T log|det B| + sum_t sum_k log f((B Y)_kt)
//! ```
//!
//! For unit-variance Laplacian sources the additive constant `-KT log sqrt(2)`
//! is dropped, leaving `T log|det B| - sqrt(2) * ||B Y||_1`.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;
use crate::signal_model::ReceivedBlock;
use crate::Matrix;

/// Square unmixing matrix `B`, an estimate of `H^-1` up to signed
/// permutation of its rows.
#[derive(Clone, Debug, PartialEq)]
pub struct UnmixingMatrix(Matrix);

impl UnmixingMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                context: "unmixing matrix",
                expected: (entries.nrows(), entries.nrows()),
                found: entries.shape(),
            });
        }
        Ok(UnmixingMatrix(entries))
    }

    pub fn identity(k: usize) -> Self {
        UnmixingMatrix(Matrix::identity(k, k))
    }

    pub fn users(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// Scalar log-density of one source sample.
#[derive(Clone)]
pub struct LogDensity {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl LogDensity {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        LogDensity {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// Zero-mean unit-variance Laplacian, normalization included.
    pub fn laplacian_unit() -> Self {
        LogDensity::new("laplacian-unit", |x| -SQRT_2 * x.abs() - SQRT_2.ln())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for LogDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogDensity")
            .field("name", &self.name)
            .finish()
    }
}

fn check_shapes(b: &UnmixingMatrix, y: &Matrix) -> Result<()> {
    if b.as_matrix().ncols() != y.nrows() {
        return Err(Error::DimensionMismatch {
            context: "B Y product",
            expected: (b.users(), b.users()),
            found: y.shape(),
        });
    }
    Ok(())
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `T log|det B| - sqrt(2) sum |(B Y)_kt|`.
pub fn log_likelihood_laplacian(b: &UnmixingMatrix, y: &ReceivedBlock) -> Result<f64> {
    check_shapes(b, &y.entries)?;
    let log_det = linalg::log_abs_det(b.as_matrix())?;
    let l1: f64 = (b.as_matrix() * &y.entries).iter().map(|v| v.abs()).sum();
    Ok(y.block_len() as f64 * log_det - SQRT_2 * l1)
}

/// `T log|det B| + sum log f((B Y)_kt)` for an arbitrary log-density.
pub fn log_likelihood_generic(
    b: &UnmixingMatrix,
    y: &ReceivedBlock,
    density: &LogDensity,
) -> Result<f64> {
    check_shapes(b, &y.entries)?;
    let log_det = linalg::log_abs_det(b.as_matrix())?;
    let sources: f64 = (b.as_matrix() * &y.entries)
        .iter()
        .map(|&v| density.eval(v))
        .sum();
    Ok(y.block_len() as f64 * log_det + sources)
}

/// Gradient of [`log_likelihood_laplacian`]: `T B^-T - sqrt(2) sign(B Y) Y^T`,
/// with `sign(0) = 0`.
pub fn gradient_laplacian(b: &UnmixingMatrix, y: &ReceivedBlock) -> Result<Matrix> {
    check_shapes(b, &y.entries)?;
    LaplacianObjective::new(y.clone()).gradient(b)
}

/// Central differences `(obj(B + h E_ij) - obj(B - h E_ij)) / 2h` per entry.
pub fn finite_difference_gradient<F>(b: &UnmixingMatrix, objective: F, h: f64) -> Result<Matrix>
where
    F: Fn(&UnmixingMatrix) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let base = b.as_matrix();
    let mut grad = Matrix::zeros(base.nrows(), base.ncols());
    let mut probe = base.clone();
    for j in 0..base.ncols() {
        for i in 0..base.nrows() {
            let orig = base[(i, j)];
            probe[(i, j)] = orig + h;
            let up = objective(&UnmixingMatrix(probe.clone()))?;
            probe[(i, j)] = orig - h;
            let down = objective(&UnmixingMatrix(probe.clone()))?;
            probe[(i, j)] = orig;
            grad[(i, j)] = (up - down) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// Laplacian objective bound to one received block, caching `Y^T` so the
/// gradient is two dense products per call.
#[derive(Clone, Debug)]
pub struct LaplacianObjective {
    y: Matrix,
    y_t: Matrix,
}

impl LaplacianObjective {
    pub fn new(y: ReceivedBlock) -> Self {
        let y_t = y.entries.transpose();
        LaplacianObjective { y: y.entries, y_t }
    }

    pub fn block_len(&self) -> usize {
        self.y.ncols()
    }

    pub fn antennas(&self) -> usize {
        self.y.nrows()
    }

    pub fn received(&self) -> &Matrix {
        &self.y
    }

    pub fn value(&self, b: &UnmixingMatrix) -> Result<f64> {
        check_shapes(b, &self.y)?;
        let log_det = linalg::log_abs_det(b.as_matrix())?;
        let l1: f64 = (b.as_matrix() * &self.y).iter().map(|v| v.abs()).sum();
        Ok(self.block_len() as f64 * log_det - SQRT_2 * l1)
    }

    pub fn gradient(&self, b: &UnmixingMatrix) -> Result<Matrix> {
        check_shapes(b, &self.y)?;
        let f = linalg::factor(b.as_matrix())?;
        let signs = (b.as_matrix() * &self.y).map(sign0);
        let t = self.block_len() as f64;
        Ok(f.inverse.transpose() * t - (signs * &self.y_t) * SQRT_2)
    }

    /// Unbiased gradient estimate from a subset of columns: the L1 term is
    /// rescaled by `T / m` so the estimate matches the full-block gradient in
    /// expectation.
    pub fn minibatch_gradient(&self, b: &UnmixingMatrix, columns: &[usize]) -> Result<Matrix> {
        check_shapes(b, &self.y)?;
        let f = linalg::factor(b.as_matrix())?;
        let sub = self.y.select_columns(columns);
        let signs = (b.as_matrix() * &sub).map(sign0);
        let t = self.block_len() as f64;
        let scale = SQRT_2 * t / columns.len() as f64;
        Ok(f.inverse.transpose() * t - (signs * sub.transpose()) * scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, v)
    }

    fn b(rows: usize, v: &[f64]) -> UnmixingMatrix {
        UnmixingMatrix::new(m(rows, rows, v)).unwrap()
    }

    fn y(rows: usize, cols: usize, v: &[f64]) -> ReceivedBlock {
        ReceivedBlock::new(m(rows, cols, v))
    }

    fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn laplacian_values() {
        let zero = ReceivedBlock::new(Matrix::zeros(16, 512));
        assert_eq!(
            log_likelihood_laplacian(&UnmixingMatrix::identity(16), &zero).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            log_likelihood_laplacian(&b(1, &[1.0]), &y(1, 1, &[1.0])).unwrap(),
            -1.414214,
            epsilon = 1e-6
        );
        let v = log_likelihood_laplacian(&b(1, &[2.0]), &y(1, 1, &[1.0])).unwrap();
        assert_abs_diff_eq!(v, 2f64.ln() - 2.0 * SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(v, -2.135280, epsilon = 1e-6);
    }

    #[test]
    fn generic_values() {
        let flat = LogDensity::new("zero", |_| 0.0);
        let any = y(2, 3, &[1.0, -2.0, 3.0, 0.5, 0.0, 7.0]);
        assert_eq!(
            log_likelihood_generic(&UnmixingMatrix::identity(2), &any, &flat).unwrap(),
            0.0
        );

        let lap = LogDensity::laplacian_unit();
        assert_eq!(lap.name(), "laplacian-unit");
        let v = log_likelihood_generic(&b(1, &[1.0]), &y(1, 1, &[1.0]), &lap).unwrap();
        assert_abs_diff_eq!(v, -SQRT_2 - SQRT_2.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, -1.760787, epsilon = 1e-6);
    }

    #[test]
    fn singular_b_is_an_error() {
        let err = log_likelihood_laplacian(&b(2, &[1.0, 1.0, 1.0, 1.0]), &y(2, 1, &[1.0, 2.0]));
        assert!(matches!(err, Err(Error::Singular { .. })));
        let err = gradient_laplacian(&b(1, &[0.0]), &y(1, 1, &[1.0]));
        assert!(matches!(err, Err(Error::Singular { .. })));
    }

    #[test]
    fn shape_errors() {
        assert!(UnmixingMatrix::new(Matrix::zeros(2, 3)).is_err());
        let err =
            log_likelihood_laplacian(&UnmixingMatrix::identity(2), &y(3, 1, &[1.0, 2.0, 3.0]));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn scalar_gradients() {
        let g = gradient_laplacian(&b(1, &[1.0]), &y(1, 1, &[1.0])).unwrap();
        assert_abs_diff_eq!(g[(0, 0)], 1.0 - SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(0, 0)], -0.414214, epsilon = 1e-6);
        let g = gradient_laplacian(&b(1, &[1.0]), &y(1, 1, &[0.0])).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
    }

    #[test]
    fn finite_differences_of_quadratic() {
        let quad = |b: &UnmixingMatrix| Ok(b.as_matrix().norm_squared());
        let point = b(2, &[0.3, -1.2, 2.0, 0.7]);
        let g = finite_difference_gradient(&point, quad, 1e-4).unwrap();
        assert!((g - point.as_matrix() * 2.0).amax() < 1e-9);
        assert!(finite_difference_gradient(&point, quad, 0.0).is_err());
    }

    #[test]
    fn finite_difference_error_is_second_order() {
        // exp has nonzero third derivative, so the truncation error is
        // visible and should shrink by ~4 when h is halved.
        let obj = |b: &UnmixingMatrix| Ok(b.as_matrix().iter().map(|v| v.exp()).sum::<f64>());
        let point = b(2, &[0.1, 0.2, -0.3, 0.4]);
        let exact = point.as_matrix().map(f64::exp);
        let e1 = (finite_difference_gradient(&point, obj, 1e-2).unwrap() - &exact).amax();
        let e2 = (finite_difference_gradient(&point, obj, 5e-3).unwrap() - &exact).amax();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = substream(123, Stream::GradCheck);
        let mut checked = 0;
        while checked < 20 {
            let bm = UnmixingMatrix::new(gaussian(4, 4, &mut rng) * 0.5).unwrap();
            let ym = ReceivedBlock::new(gaussian(4, 16, &mut rng));
            let prod = bm.as_matrix() * &ym.entries;
            if prod.iter().any(|v| v.abs() <= 1e-3) {
                continue;
            }
            let analytic = gradient_laplacian(&bm, &ym).unwrap();
            let numeric =
                finite_difference_gradient(&bm, |p| log_likelihood_laplacian(p, &ym), 1e-5)
                    .unwrap();
            let rel = (&analytic - &numeric).norm() / numeric.norm();
            assert!(rel <= 1e-5, "relative error {rel}");
            checked += 1;
        }
    }

    #[test]
    fn full_minibatch_equals_full_gradient() {
        let mut rng = substream(5, Stream::GradCheck);
        let bm = UnmixingMatrix::new(gaussian(3, 3, &mut rng)).unwrap();
        let ym = ReceivedBlock::new(gaussian(3, 12, &mut rng));
        let obj = LaplacianObjective::new(ym.clone());
        let all: Vec<usize> = (0..12).collect();
        let diff = (obj.minibatch_gradient(&bm, &all).unwrap() - obj.gradient(&bm).unwrap()).amax();
        assert!(diff < 1e-12);
        assert_abs_diff_eq!(
            obj.value(&bm).unwrap(),
            log_likelihood_laplacian(&bm, &ym).unwrap(),
            epsilon = 1e-12
        );
    }
}
