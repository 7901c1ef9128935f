//! Seeded experiments, block-length sweeps and gradient checks.
//!
//! Trial `i` of an experiment draws everything from `trial_seed(seed, i)`,
//! where `seed` is the scenario's master seed, so reruns reproduce every
//! artifact byte for byte and a sweep over `T` reuses the same channels.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::detector::{detect, DetectionResult};
use crate::error::{Error, Result};
use crate::likelihood::{
    finite_difference_gradient, gradient_laplacian, log_likelihood_laplacian, UnmixingMatrix,
};
use crate::optimizer::OptimizerConfig;
use crate::rng::{substream, trial_seed, Stream};
use crate::signal_model::{ReceivedBlock, Scenario, ScenarioConfig};
use crate::{linalg, Matrix};

/// Artifact kinds an experiment can write.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    RhoCsv,
    TrajectoryCsv,
    SummaryJson,
}

fn all_emits() -> BTreeSet<Emit> {
    [Emit::RhoCsv, Emit::TrajectoryCsv, Emit::SummaryJson].into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub trials: usize,
    pub output_dir: PathBuf,
    #[serde(default = "all_emits")]
    pub emit: BTreeSet<Emit>,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioConfig, trials: usize, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            scenario,
            optimizer: OptimizerConfig::default(),
            trials,
            output_dir: output_dir.into(),
            emit: all_emits(),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.optimizer.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    /// Set when the trial failed; such trials are left out of aggregates.
    pub failure: Option<String>,
    pub permutation: Vec<usize>,
    pub matched_correlations: Vec<f64>,
    pub min_matched: Option<f64>,
    pub mean_matched: Option<f64>,
    pub per_cell_mean: Vec<f64>,
    pub final_objective: Option<f64>,
    pub restarts: usize,
}

impl TrialRecord {
    fn failed(index: usize, seed: u64, reason: String) -> Self {
        TrialRecord {
            index,
            seed,
            failure: Some(reason),
            permutation: Vec::new(),
            matched_correlations: Vec::new(),
            min_matched: None,
            mean_matched: None,
            per_cell_mean: Vec::new(),
            final_objective: None,
            restarts: 0,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub trials: Vec<TrialRecord>,
    pub completed: usize,
    pub failed: usize,
    /// Smallest matched correlation over all completed trials.
    pub min_matched: Option<f64>,
    /// Mean of the per-trial mean matched correlations.
    pub mean_matched: Option<f64>,
    pub max_matched: Option<f64>,
    /// Per-cell mean matched correlation, averaged over completed trials.
    pub per_cell_mean: Vec<f64>,
    /// Wall-clock seconds per trial; kept out of the JSON so summaries of
    /// repeated runs stay identical.
    #[serde(skip)]
    pub wall_clock_secs: Vec<f64>,
}

impl ExperimentSummary {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    fn aggregate(
        config: ExperimentConfig,
        trials: Vec<TrialRecord>,
        wall_clock_secs: Vec<f64>,
    ) -> Self {
        let ok: Vec<&TrialRecord> = trials.iter().filter(|t| t.succeeded()).collect();
        let completed = ok.len();
        let mean_of = |vals: Vec<f64>| -> Option<f64> {
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let all_matched = || {
            ok.iter()
                .flat_map(|t| t.matched_correlations.iter().copied())
        };
        let min_matched = all_matched().reduce(f64::min);
        let max_matched = all_matched().reduce(f64::max);
        let mean_matched = mean_of(ok.iter().filter_map(|t| t.mean_matched).collect());
        let cells = config.scenario.cell_user_counts.len();
        let per_cell_mean = if completed == 0 {
            Vec::new()
        } else {
            (0..cells)
                .map(|c| ok.iter().map(|t| t.per_cell_mean[c]).sum::<f64>() / completed as f64)
                .collect()
        };
        ExperimentSummary {
            seeds: trials.iter().map(|t| t.seed).collect(),
            failed: trials.len() - completed,
            completed,
            min_matched,
            mean_matched,
            max_matched,
            per_cell_mean,
            config,
            trials,
            wall_clock_secs,
        }
    }
}

struct TrialOutput {
    record: TrialRecord,
    detection: Option<DetectionResult>,
    secs: f64,
}

fn run_trial(config: &ExperimentConfig, index: usize) -> TrialOutput {
    let seed = trial_seed(config.scenario.seed, index);
    let start = Instant::now();
    let outcome = Scenario::generate(&config.scenario, seed).and_then(|scenario| {
        let mut rng = substream(seed, Stream::Optimizer);
        let result = detect(
            &scenario.received,
            &config.optimizer,
            Some(&scenario.symbols),
            &mut rng,
        )?;
        Ok((scenario, result))
    });
    let secs = start.elapsed().as_secs_f64();
    let (record, detection) = match outcome {
        Ok((scenario, result)) => {
            let truth = result.truth.as_ref().expect("truth supplied");
            let m = &truth.matching;
            let record = TrialRecord {
                index,
                seed,
                failure: None,
                permutation: m.permutation.clone(),
                matched_correlations: m.matched_correlations.clone(),
                min_matched: Some(m.min()),
                mean_matched: Some(m.mean()),
                per_cell_mean: m.per_cell_means(&scenario.symbols.cell_of_row),
                final_objective: Some(result.trajectory.final_objective()),
                restarts: result.trajectory.restarts,
            };
            (record, Some(result))
        }
        Err(e) => (TrialRecord::failed(index, seed, e.to_string()), None),
    };
    TrialOutput {
        record,
        detection,
        secs,
    }
}

#[cfg(feature = "parallel")]
fn run_trials(config: &ExperimentConfig) -> Vec<TrialOutput> {
    use rayon::prelude::*;
    (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_trials(config: &ExperimentConfig) -> Vec<TrialOutput> {
    (0..config.trials).map(|i| run_trial(config, i)).collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_trial_artifacts(config: &ExperimentConfig, out: &TrialOutput) -> Result<()> {
    let Some(result) = &out.detection else {
        return Ok(());
    };
    let dir = &config.output_dir;
    let stem = format!("trial_{:03}", out.record.index);
    if config.emit.contains(&Emit::RhoCsv) {
        if let Some(truth) = &result.truth {
            write_file(&dir.join(format!("{stem}_rho.csv")), &truth.rho.abs_csv())?;
        }
    }
    if config.emit.contains(&Emit::TrajectoryCsv) {
        write_file(
            &dir.join(format!("{stem}_trajectory.csv")),
            &result.trajectory.to_csv(),
        )?;
    }
    if config.emit.contains(&Emit::SummaryJson) {
        let mut text = serde_json::to_string_pretty(&result.report())?;
        text.push('\n');
        write_file(&dir.join(format!("{stem}_detection.json")), &text)?;
    }
    Ok(())
}

/// Runs every trial, writes the requested artifacts and returns the summary.
///
/// A trial that fails (e.g. singular iterates on every restart) is recorded
/// with its reason and excluded from the aggregates.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let outputs = run_trials(config);
    for out in &outputs {
        write_trial_artifacts(config, out)?;
    }
    let secs = outputs.iter().map(|o| o.secs).collect();
    let records = outputs.into_iter().map(|o| o.record).collect();
    let summary = ExperimentSummary::aggregate(config.clone(), records, secs);
    if config.emit.contains(&Emit::SummaryJson) {
        write_file(&config.output_dir.join("summary.json"), &summary.to_json()?)?;
    }
    Ok(summary)
}

/// Runs `base` once per block length, all with the same trial seeds.
///
/// Results for length `T` go to `<output_dir>/T<T>/`, and
/// `<output_dir>/sweep.csv` lists `T,mean_matched,min_matched`.
pub fn run_sweep(
    base: &ExperimentConfig,
    block_lengths: &[usize],
) -> Result<Vec<ExperimentSummary>> {
    if block_lengths.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep needs at least one block length".into(),
        ));
    }
    let users = base.scenario.total_users();
    if let Some(&t) = block_lengths.iter().find(|&&t| t <= 2 * users) {
        return Err(Error::InvalidConfig(format!(
            "block length {t} must exceed 2K = {}",
            2 * users
        )));
    }
    let mut summaries = Vec::with_capacity(block_lengths.len());
    let mut csv = String::from("T,mean_matched,min_matched\n");
    for &t in block_lengths {
        let mut config = base.clone();
        config.scenario.coherence_block = t;
        config.output_dir = base.output_dir.join(format!("T{t}"));
        let summary = run_experiment(&config)?;
        let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{t},{},{}",
            cell(summary.mean_matched),
            cell(summary.min_matched)
        );
        summaries.push(summary);
    }
    write_file(&base.output_dir.join("sweep.csv"), &csv)?;
    Ok(summaries)
}

/// Central-difference step used by the gradient check.
pub const GRAD_CHECK_STEP: f64 = 1e-5;
/// Largest accepted relative Frobenius error.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-5;
/// Smallest `|(B Y)_kt|` for a point to count as smooth.
pub const SMOOTH_MARGIN: f64 = 1e-3;
/// Draws allowed per instance while looking for a smooth point.
pub const MAX_SMOOTH_DRAWS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub users: usize,
    pub block_len: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// `||analytic - numeric||_F / ||numeric||_F` per instance.
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.relative_errors.iter().all(|&e| e <= self.tolerance)
    }
}

/// Compares the analytic Laplacian gradient with central differences.
pub fn run_gradient_check(
    users: usize,
    block_len: usize,
    instances: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    run_gradient_check_with(users, block_len, instances, seed, gradient_laplacian)
}

/// [`run_gradient_check`] against a caller-supplied gradient.
pub fn run_gradient_check_with<G>(
    users: usize,
    block_len: usize,
    instances: usize,
    seed: u64,
    gradient: G,
) -> Result<GradCheckReport>
where
    G: Fn(&UnmixingMatrix, &ReceivedBlock) -> Result<Matrix>,
{
    if users == 0 || block_len == 0 {
        return Err(Error::InvalidConfig(
            "gradient check needs K >= 1 and T >= 1".into(),
        ));
    }
    let mut rng = substream(seed, Stream::GradCheck);
    let scale = 1.0 / (users as f64).sqrt();
    let mut relative_errors = Vec::with_capacity(instances);
    for _ in 0..instances {
        let (b, y) = smooth_point(users, block_len, scale, &mut rng)?;
        let analytic = gradient(&b, &y)?;
        let numeric =
            finite_difference_gradient(&b, |p| log_likelihood_laplacian(p, &y), GRAD_CHECK_STEP)?;
        let denom = numeric.norm().max(f64::MIN_POSITIVE);
        relative_errors.push((analytic - &numeric).norm() / denom);
    }
    let max_relative_error = relative_errors.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        users,
        block_len,
        seed,
        tolerance: GRAD_CHECK_TOLERANCE,
        relative_errors,
        max_relative_error,
    })
}

fn smooth_point<R: Rng + ?Sized>(
    users: usize,
    block_len: usize,
    scale: f64,
    rng: &mut R,
) -> Result<(UnmixingMatrix, ReceivedBlock)> {
    let mut gaussian = |rows, cols, s: f64| {
        Matrix::from_fn(rows, cols, |_, _| s * rng.sample::<f64, _>(StandardNormal))
    };
    for _ in 0..MAX_SMOOTH_DRAWS {
        let b = gaussian(users, users, scale);
        let y = gaussian(users, block_len, 1.0);
        // The stencil must not cross a kink of |.| nor approach singularity.
        let margin = SMOOTH_MARGIN + GRAD_CHECK_STEP * y.amax();
        if linalg::reciprocal_condition(&b) < 1e-6 || (&b * &y).iter().any(|v| v.abs() <= margin) {
            continue;
        }
        return Ok((UnmixingMatrix::new(b)?, ReceivedBlock::new(y)));
    }
    Err(Error::RetryLimit {
        what: "smooth gradient-check point",
        attempts: MAX_SMOOTH_DRAWS,
    })
}
