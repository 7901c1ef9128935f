//! Gradient ascent on the Laplacian log-likelihood.
//!
//! Both update rules climb the objective (`B <- B + step`). Every
//! `record_every` iterations the optimizer logs the mean and max absolute
//! entry change since the previous record, together with the current
//! objective value.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::likelihood::{LaplacianObjective, UnmixingMatrix};
use crate::linalg;
use crate::signal_model::ReceivedBlock;
use crate::Matrix;

/// Draws allowed when sampling a nonsingular initial point.
pub const MAX_INIT_DRAWS: usize = 100;

/// Re-initializations after a singular iterate before a run is abandoned.
pub const MAX_RESTARTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Adam,
    Sgd,
}

/// Columns used per gradient evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Minibatch {
    Full,
    Size(usize),
}

impl Serialize for Minibatch {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Minibatch::Full => s.serialize_str("full"),
            Minibatch::Size(m) => s.serialize_u64(*m as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Minibatch {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Size(usize),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Size(m) => Ok(Minibatch::Size(m)),
            Raw::Tag(tag) if tag == "full" => Ok(Minibatch::Full),
            Raw::Tag(tag) => Err(serde::de::Error::custom(format!(
                "minibatch_size must be an integer or \"full\", got {tag:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub total_iterations: usize,
    pub record_every: usize,
    pub minibatch_size: Minibatch,
    /// Standard deviation of the Gaussian initial point; `None` means `1/sqrt(K)`.
    pub init_scale: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::Adam,
            learning_rate: 1e-2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            total_iterations: 5000,
            record_every: 10,
            minibatch_size: Minibatch::Full,
            init_scale: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        for (name, beta) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&beta) {
                return bad(format!("{name} must lie in [0, 1), got {beta}"));
            }
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return bad(format!(
                "adam_epsilon must be positive, got {}",
                self.adam_epsilon
            ));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if self.minibatch_size == Minibatch::Size(0) {
            return bad("minibatch_size must be positive".into());
        }
        if let Some(scale) = self.init_scale {
            if !(scale > 0.0 && scale.is_finite()) {
                return bad(format!("init_scale must be positive, got {scale}"));
            }
        }
        Ok(())
    }

    pub fn init_scale_for(&self, users: usize) -> f64 {
        self.init_scale
            .unwrap_or_else(|| 1.0 / (users as f64).sqrt())
    }
}

/// Adam first and second moment accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first: Matrix,
    pub second: Matrix,
    pub steps: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        AdamState {
            first: Matrix::zeros(rows, cols),
            second: Matrix::zeros(rows, cols),
            steps: 0,
        }
    }
}

fn check_gradient(b: &UnmixingMatrix, grad: &Matrix, iteration: usize) -> Result<()> {
    if grad.shape() != b.as_matrix().shape() {
        return Err(Error::DimensionMismatch {
            context: "gradient",
            expected: b.as_matrix().shape(),
            found: grad.shape(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { iteration });
    }
    Ok(())
}

/// One bias-corrected Adam ascent step.
pub fn adam_update(
    b: &UnmixingMatrix,
    grad: &Matrix,
    state: &AdamState,
    config: &OptimizerConfig,
) -> Result<(UnmixingMatrix, AdamState)> {
    check_gradient(b, grad, state.steps as usize + 1)?;
    let beta1 = config.adam_beta1;
    let beta2 = config.adam_beta2;
    let steps = state.steps + 1;
    let first = &state.first * beta1 + grad * (1.0 - beta1);
    let second = &state.second * beta2 + grad.map(|g| g * g) * (1.0 - beta2);
    let c1 = 1.0 - beta1.powf(steps as f64);
    let c2 = 1.0 - beta2.powf(steps as f64);
    let lr = config.learning_rate;
    let eps = config.adam_epsilon;
    let step = first.zip_map(&second, |m, v| lr * (m / c1) / ((v / c2).sqrt() + eps));
    let next = UnmixingMatrix::new(b.as_matrix() + step)?;
    Ok((
        next,
        AdamState {
            first,
            second,
            steps,
        },
    ))
}

/// Plain gradient ascent step `B + lr * grad`.
pub fn sgd_update(
    b: &UnmixingMatrix,
    grad: &Matrix,
    config: &OptimizerConfig,
) -> Result<UnmixingMatrix> {
    check_gradient(b, grad, 0)?;
    UnmixingMatrix::new(b.as_matrix() + grad * config.learning_rate)
}

/// Gaussian initial point with entry standard deviation `scale`.
pub fn init_unmixing<R: Rng + ?Sized>(k: usize, scale: f64, rng: &mut R) -> Result<UnmixingMatrix> {
    if k == 0 {
        return Err(Error::InvalidConfig(
            "unmixing matrix needs at least one user".into(),
        ));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "init scale must be positive, got {scale}"
        )));
    }
    for _ in 0..MAX_INIT_DRAWS {
        let m = Matrix::from_fn(k, k, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        if linalg::log_abs_det(&m).is_ok() {
            return UnmixingMatrix::new(m);
        }
    }
    Err(Error::RetryLimit {
        what: "initial unmixing matrix",
        attempts: MAX_INIT_DRAWS,
    })
}

/// Step diagnostics at one record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    /// 1-based record index.
    pub step: usize,
    pub iteration: usize,
    pub average_step: f64,
    pub maximum_step: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trajectory {
    /// Objective at the initial point of the successful attempt.
    pub initial_objective: f64,
    pub records: Vec<TrajectoryRecord>,
    /// Re-initializations forced by singular iterates.
    pub restarts: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_objective(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_objective, |r| r.objective)
    }

    pub fn average_steps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.average_step).collect()
    }

    pub fn maximum_steps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.maximum_step).collect()
    }

    /// CSV with header `step,iteration,avg_step,max_step,objective`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,iteration,avg_step,max_step,objective\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.step, r.iteration, r.average_step, r.maximum_step, r.objective
            );
        }
        out
    }
}

/// Mean and max of `|cur - prev|` over all entries.
pub fn step_metrics(prev: &UnmixingMatrix, cur: &UnmixingMatrix) -> (f64, f64) {
    let diff = cur.as_matrix() - prev.as_matrix();
    let count = diff.len().max(1) as f64;
    let sum: f64 = diff.iter().map(|d| d.abs()).sum();
    (sum / count, diff.amax())
}

/// Maximizes the Laplacian log-likelihood of `y` from a random start.
///
/// A singular iterate triggers a fresh initialization (at most
/// [`MAX_RESTARTS`] times); the returned trajectory belongs to the attempt
/// that finished.
pub fn run_optimization<R: Rng + ?Sized>(
    y: &ReceivedBlock,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<(UnmixingMatrix, Trajectory)> {
    config.validate()?;
    if y.antennas() == 0 || y.block_len() == 0 {
        return Err(Error::InvalidConfig("received block is empty".into()));
    }
    if y.entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "received block has non-finite entries".into(),
        ));
    }
    let objective = LaplacianObjective::new(y.clone());
    with_restarts(|| attempt(&objective, config, rng))
}

fn with_restarts<F>(mut run: F) -> Result<(UnmixingMatrix, Trajectory)>
where
    F: FnMut() -> Result<(UnmixingMatrix, Trajectory)>,
{
    for restarts in 0..=MAX_RESTARTS {
        match run() {
            Ok((b, mut trajectory)) => {
                trajectory.restarts = restarts;
                return Ok((b, trajectory));
            }
            Err(Error::Singular { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::OptimizationFailed {
        attempts: MAX_RESTARTS + 1,
    })
}

fn attempt<R: Rng + ?Sized>(
    objective: &LaplacianObjective,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<(UnmixingMatrix, Trajectory)> {
    let k = objective.antennas();
    let t = objective.block_len();
    let mut b = init_unmixing(k, config.init_scale_for(k), rng)?;
    let mut trajectory = Trajectory {
        initial_objective: objective.value(&b)?,
        records: Vec::with_capacity(config.total_iterations / config.record_every),
        restarts: 0,
    };
    let batch = match config.minibatch_size {
        Minibatch::Size(m) if m < t => Some(m),
        _ => None,
    };
    let mut adam = AdamState::new(k, k);
    let mut last_recorded = b.clone();

    for iteration in 1..=config.total_iterations {
        let grad = match batch {
            None => objective.gradient(&b)?,
            Some(m) => {
                let columns = rand::seq::index::sample(rng, t, m).into_vec();
                objective.minibatch_gradient(&b, &columns)?
            }
        };
        check_gradient(&b, &grad, iteration)?;
        b = match config.method {
            Method::Adam => {
                let (next, state) = adam_update(&b, &grad, &adam, config)?;
                adam = state;
                next
            }
            Method::Sgd => sgd_update(&b, &grad, config)?,
        };
        if iteration % config.record_every == 0 {
            let (average_step, maximum_step) = step_metrics(&last_recorded, &b);
            trajectory.records.push(TrajectoryRecord {
                step: trajectory.records.len() + 1,
                iteration,
                average_step,
                maximum_step,
                objective: objective.value(&b)?,
            });
            last_recorded = b.clone();
        }
    }
    Ok((b, trajectory))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::log_likelihood_laplacian;
    use crate::rng::{substream, Stream};
    use crate::signal_model::{Scenario, ScenarioConfig};
    use approx::assert_abs_diff_eq;

    fn scalar(v: f64) -> UnmixingMatrix {
        UnmixingMatrix::new(Matrix::from_element(1, 1, v)).unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = OptimizerConfig::default();
        c.validate().unwrap();
        assert_eq!(c.init_scale_for(16), 0.25);
        assert!(OptimizerConfig {
            adam_beta1: 1.0,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig {
            adam_epsilon: 0.0,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig {
            record_every: 0,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig {
            learning_rate: -1.0,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig {
            minibatch_size: Minibatch::Size(0),
            ..c
        }
        .validate()
        .is_err());
    }

    #[test]
    fn config_json() {
        let parsed: OptimizerConfig =
            serde_json::from_str(r#"{"method":"sgd","minibatch_size":64,"learning_rate":0.5}"#)
                .unwrap();
        assert_eq!(parsed.method, Method::Sgd);
        assert_eq!(parsed.minibatch_size, Minibatch::Size(64));
        assert_eq!(parsed.total_iterations, 5000);
        let text = serde_json::to_string(&OptimizerConfig::default()).unwrap();
        assert!(text.contains("\"minibatch_size\":\"full\""));
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"momentum":0.9}"#).is_err());
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"minibatch_size":"half"}"#).is_err());
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let b = UnmixingMatrix::new(Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let cfg = OptimizerConfig::default();
        let (next, state) =
            adam_update(&b, &Matrix::zeros(2, 2), &AdamState::new(2, 2), &cfg).unwrap();
        assert_eq!(next, b);
        assert_eq!(state.steps, 1);
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let b = UnmixingMatrix::new(Matrix::zeros(2, 2)).unwrap();
        let g = Matrix::from_row_slice(2, 2, &[3.0, -0.2, 1e3, -7.5]);
        let cfg = OptimizerConfig::default();
        let (next, _) = adam_update(&b, &g, &AdamState::new(2, 2), &cfg).unwrap();
        for (x, gv) in next.as_matrix().iter().zip(g.iter()) {
            let expected = cfg.learning_rate * gv / (gv.abs() + cfg.adam_epsilon);
            assert_abs_diff_eq!(*x, expected, epsilon = 1e-15);
            assert_abs_diff_eq!(*x, cfg.learning_rate * gv.signum(), epsilon = 1e-9);
        }
        // Same direction as SGD, normalized per entry.
        let sgd = sgd_update(&b, &g, &cfg).unwrap();
        for (a, s) in next.as_matrix().iter().zip(sgd.as_matrix().iter()) {
            assert_eq!(a.signum(), s.signum());
        }
    }

    #[test]
    fn adam_is_pure() {
        let b = scalar(0.3);
        let g = Matrix::from_element(1, 1, 2.0);
        let state = AdamState {
            first: Matrix::from_element(1, 1, 0.4),
            second: Matrix::from_element(1, 1, 0.9),
            steps: 7,
        };
        let cfg = OptimizerConfig::default();
        assert_eq!(
            adam_update(&b, &g, &state, &cfg).unwrap(),
            adam_update(&b, &g, &state, &cfg).unwrap()
        );
    }

    #[test]
    fn non_finite_gradients_abort() {
        let cfg = OptimizerConfig::default();
        let g = Matrix::from_element(1, 1, f64::NAN);
        assert!(matches!(
            adam_update(&scalar(1.0), &g, &AdamState::new(1, 1), &cfg),
            Err(Error::NonFiniteGradient { .. })
        ));
        assert!(matches!(
            sgd_update(&scalar(1.0), &g, &cfg),
            Err(Error::NonFiniteGradient { .. })
        ));
    }

    #[test]
    fn sgd_steps() {
        let cfg = OptimizerConfig {
            learning_rate: 0.1,
            ..Default::default()
        };
        assert_eq!(
            sgd_update(&scalar(0.0), &Matrix::from_element(1, 1, 1.0), &cfg).unwrap(),
            scalar(0.1)
        );
        assert_eq!(
            sgd_update(&scalar(0.5), &Matrix::zeros(1, 1), &cfg).unwrap(),
            scalar(0.5)
        );
    }

    #[test]
    fn init_scale_and_determinism() {
        let mut rng = substream(1, Stream::Optimizer);
        let mut sum_sq = 0.0;
        let draws = 200;
        for _ in 0..draws {
            sum_sq += init_unmixing(16, 0.25, &mut rng)
                .unwrap()
                .as_matrix()
                .norm_squared();
        }
        let std = (sum_sq / (draws * 256) as f64).sqrt();
        assert!((std - 0.25).abs() < 0.005, "std {std}");

        let a = init_unmixing(4, 1.0, &mut substream(9, Stream::Optimizer)).unwrap();
        let b = init_unmixing(4, 1.0, &mut substream(9, Stream::Optimizer)).unwrap();
        assert_eq!(a, b);
        let one = init_unmixing(1, 1.0, &mut substream(3, Stream::Optimizer)).unwrap();
        assert_ne!(one.as_matrix()[(0, 0)], 0.0);
        assert!(init_unmixing(0, 1.0, &mut substream(3, Stream::Optimizer)).is_err());
    }

    #[test]
    fn step_metrics_mean_and_max() {
        let a = UnmixingMatrix::new(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 3.0])).unwrap();
        let b = UnmixingMatrix::new(Matrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 3.25])).unwrap();
        let (avg, max) = step_metrics(&a, &b);
        assert_abs_diff_eq!(avg, (0.5 + 0.0 + 1.0 + 0.25) / 4.0, epsilon = 1e-15);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn scalar_problem_converges_to_analytic_optimum() {
        // T ln|b| - sqrt(2) T |b| peaks at |b| = 1/sqrt(2).
        let y = ReceivedBlock::new(Matrix::from_element(1, 100, 1.0));
        for seed in 0..5 {
            let (b, traj) = run_optimization(
                &y,
                &OptimizerConfig::default(),
                &mut substream(seed, Stream::Optimizer),
            )
            .unwrap();
            let v = b.as_matrix()[(0, 0)].abs();
            assert!((0.70..=0.72).contains(&v), "seed {seed}: |b| = {v}");
            assert_eq!(traj.len(), 500);
        }
    }

    #[test]
    fn sgd_and_minibatch_also_converge_on_scalar_problem() {
        let y = ReceivedBlock::new(Matrix::from_element(1, 100, 1.0));
        let sgd = OptimizerConfig {
            method: Method::Sgd,
            learning_rate: 1e-3,
            ..Default::default()
        };
        let (b, _) = run_optimization(&y, &sgd, &mut substream(1, Stream::Optimizer)).unwrap();
        assert_abs_diff_eq!(
            b.as_matrix()[(0, 0)].abs(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-3
        );
        // Constant columns make every minibatch exact.
        let mb = OptimizerConfig {
            minibatch_size: Minibatch::Size(10),
            ..Default::default()
        };
        let (b, _) = run_optimization(&y, &mb, &mut substream(1, Stream::Optimizer)).unwrap();
        assert!((0.70..=0.72).contains(&b.as_matrix()[(0, 0)].abs()));
    }

    #[test]
    fn zero_iterations_returns_initial_point() {
        let y = ReceivedBlock::new(Matrix::from_element(2, 10, 1.0));
        let cfg = OptimizerConfig {
            total_iterations: 0,
            ..Default::default()
        };
        let (b, traj) = run_optimization(&y, &cfg, &mut substream(4, Stream::Optimizer)).unwrap();
        let init = init_unmixing(
            2,
            cfg.init_scale_for(2),
            &mut substream(4, Stream::Optimizer),
        )
        .unwrap();
        assert_eq!(b, init);
        assert!(traj.is_empty());
    }

    #[test]
    fn trajectory_length_and_ordering() {
        let scenario = Scenario::generate(&ScenarioConfig::single_cell(4, 64, 0), 2).unwrap();
        let cfg = OptimizerConfig {
            total_iterations: 125,
            record_every: 7,
            ..Default::default()
        };
        let (_, traj) = run_optimization(
            &scenario.received,
            &cfg,
            &mut substream(2, Stream::Optimizer),
        )
        .unwrap();
        assert_eq!(traj.len(), 125 / 7);
        for (i, r) in traj.records.iter().enumerate() {
            assert_eq!(r.step, i + 1);
            assert_eq!(r.iteration, 7 * (i + 1));
            assert!(r.average_step <= r.maximum_step);
        }
        let csv = traj.to_csv();
        assert!(csv.starts_with("step,iteration,avg_step,max_step,objective\n"));
        assert_eq!(csv.lines().count(), 1 + traj.len());
    }

    #[test]
    fn runs_are_deterministic() {
        let scenario = Scenario::generate(&ScenarioConfig::single_cell(3, 40, 0), 8).unwrap();
        let cfg = OptimizerConfig {
            total_iterations: 200,
            minibatch_size: Minibatch::Size(16),
            ..Default::default()
        };
        let a = run_optimization(
            &scenario.received,
            &cfg,
            &mut substream(5, Stream::Optimizer),
        )
        .unwrap();
        let b = run_optimization(
            &scenario.received,
            &cfg,
            &mut substream(5, Stream::Optimizer),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singular_attempts_restart_then_fail() {
        let singular = || {
            Err(Error::Singular {
                log_abs_det: f64::NEG_INFINITY,
            })
        };

        let mut calls = 0;
        let (_, traj) = with_restarts(|| {
            calls += 1;
            if calls <= 2 {
                singular()
            } else {
                Ok((scalar(1.0), Trajectory::default()))
            }
        })
        .unwrap();
        assert_eq!(traj.restarts, 2);

        let mut calls = 0;
        let err = with_restarts(|| {
            calls += 1;
            singular()
        });
        assert!(matches!(
            err,
            Err(Error::OptimizationFailed { attempts: 4 })
        ));
        assert_eq!(calls, MAX_RESTARTS + 1);

        // Other errors are not retried.
        let mut calls = 0;
        let err = with_restarts(|| {
            calls += 1;
            Err(Error::NonFiniteGradient { iteration: 3 })
        });
        assert!(matches!(err, Err(Error::NonFiniteGradient { .. })));
        assert_eq!(calls, 1);
    }

    #[test]
    fn non_finite_block_is_rejected() {
        let y = ReceivedBlock::new(Matrix::from_element(2, 10, f64::NAN));
        let err = run_optimization(
            &y,
            &OptimizerConfig::default(),
            &mut substream(0, Stream::Optimizer),
        );
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn ascent_improves_objective_on_most_seeds() {
        let cfg = OptimizerConfig {
            total_iterations: 300,
            ..Default::default()
        };
        let mut improved = 0;
        for seed in 0..100 {
            let scenario =
                Scenario::generate(&ScenarioConfig::single_cell(4, 64, 0), seed).unwrap();
            let (b, traj) = run_optimization(
                &scenario.received,
                &cfg,
                &mut substream(seed, Stream::Optimizer),
            )
            .unwrap();
            let final_value = log_likelihood_laplacian(&b, &scenario.received).unwrap();
            assert_abs_diff_eq!(final_value, traj.final_objective(), epsilon = 1e-9);
            if final_value >= traj.initial_objective {
                improved += 1;
            }
        }
        assert!(improved >= 95, "{improved}/100");
    }
}
