//! Browser bindings: run a detection, sample the symbol law, check the gradient.

use blind_mimo::rng::{substream, Stream};
use blind_mimo::{
    detect, run_gradient_check, sample_laplacian, Error, Method, OptimizerConfig, Scenario,
    ScenarioConfig, Snr,
};
use wasm_bindgen::prelude::*;

/// Outcome of one detection, flattened for JavaScript.
#[wasm_bindgen]
#[derive(Clone, Debug)]
pub struct DemoRun {
    users: usize,
    abs_rho: Vec<f64>,
    permutation: Vec<u32>,
    matched: Vec<f64>,
    iterations: Vec<u32>,
    average_steps: Vec<f64>,
    maximum_steps: Vec<f64>,
    objectives: Vec<f64>,
    initial_objective: f64,
    restarts: usize,
}

#[wasm_bindgen]
impl DemoRun {
    #[wasm_bindgen(getter)]
    pub fn users(&self) -> usize {
        self.users
    }
    /// `|rho|`, row-major, rows indexed by true user.
    #[wasm_bindgen(getter, js_name = absRho)]
    pub fn abs_rho(&self) -> Vec<f64> {
        self.abs_rho.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn permutation(&self) -> Vec<u32> {
        self.permutation.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn matched(&self) -> Vec<f64> {
        self.matched.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> Vec<u32> {
        self.iterations.clone()
    }
    #[wasm_bindgen(getter, js_name = averageSteps)]
    pub fn average_steps(&self) -> Vec<f64> {
        self.average_steps.clone()
    }
    #[wasm_bindgen(getter, js_name = maximumSteps)]
    pub fn maximum_steps(&self) -> Vec<f64> {
        self.maximum_steps.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn objectives(&self) -> Vec<f64> {
        self.objectives.clone()
    }
    #[wasm_bindgen(getter, js_name = initialObjective)]
    pub fn initial_objective(&self) -> f64 {
        self.initial_objective
    }
    #[wasm_bindgen(getter)]
    pub fn restarts(&self) -> usize {
        self.restarts
    }
}

/// `snr_db` of `None` means noiseless.
pub fn detection(
    users: usize,
    block_len: usize,
    snr_db: Option<f64>,
    seed: u64,
    iterations: usize,
    learning_rate: f64,
    sgd: bool,
) -> Result<DemoRun, Error> {
    let mut scenario = ScenarioConfig::single_cell(users, block_len, seed);
    scenario.snr = snr_db.map_or(Snr::Noiseless, |db| Snr::Linear(10f64.powf(db / 10.0)));
    scenario.validate()?;
    let optimizer = OptimizerConfig {
        method: if sgd { Method::Sgd } else { Method::Adam },
        learning_rate,
        total_iterations: iterations,
        record_every: (iterations / 200).max(1),
        ..OptimizerConfig::default()
    };
    optimizer.validate()?;

    let s = Scenario::generate(&scenario, seed)?;
    let result = detect(
        &s.received,
        &optimizer,
        Some(&s.symbols),
        &mut substream(seed, Stream::Optimizer),
    )?;
    let truth = result.truth.expect("truth was supplied");
    let records = &result.trajectory.records;
    Ok(DemoRun {
        users,
        abs_rho: truth.rho.abs().transpose().iter().copied().collect(),
        permutation: truth
            .matching
            .permutation
            .iter()
            .map(|&j| j as u32)
            .collect(),
        matched: truth.matching.matched_correlations.clone(),
        iterations: records.iter().map(|r| r.iteration as u32).collect(),
        average_steps: records.iter().map(|r| r.average_step).collect(),
        maximum_steps: records.iter().map(|r| r.maximum_step).collect(),
        objectives: records.iter().map(|r| r.objective).collect(),
        initial_objective: result.trajectory.initial_objective,
        restarts: result.trajectory.restarts,
    })
}

/// Empirical density of `samples` unit-variance Laplacian draws on
/// `bins` equal cells of `[-range, range]`.
pub fn histogram(samples: usize, bins: usize, range: f64, seed: u64) -> Result<Vec<f64>, Error> {
    if samples == 0 || bins == 0 || !(range > 0.0 && range.is_finite()) {
        return Err(Error::InvalidConfig(
            "histogram needs samples > 0, bins > 0 and a positive range".into(),
        ));
    }
    let width = 2.0 * range / bins as f64;
    let mut counts = vec![0.0; bins];
    let mut rng = substream(seed, Stream::Symbols);
    for _ in 0..samples {
        let x = sample_laplacian(&mut rng);
        if x.abs() < range {
            counts[(((x + range) / width) as usize).min(bins - 1)] += 1.0;
        }
    }
    let norm = samples as f64 * width;
    Ok(counts.into_iter().map(|c| c / norm).collect())
}

fn js_error(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Simulates a single-cell block and runs the detector on it. `snr_db` of
/// `undefined` means noiseless.
#[wasm_bindgen(js_name = runDetection)]
pub fn run_detection(
    users: usize,
    block_len: usize,
    snr_db: Option<f64>,
    seed: u64,
    iterations: usize,
    learning_rate: f64,
    sgd: bool,
) -> Result<DemoRun, JsError> {
    detection(
        users,
        block_len,
        snr_db,
        seed,
        iterations,
        learning_rate,
        sgd,
    )
    .map_err(js_error)
}

#[wasm_bindgen(js_name = laplacianHistogram)]
pub fn laplacian_histogram(
    samples: usize,
    bins: usize,
    range: f64,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    histogram(samples, bins, range, seed).map_err(js_error)
}

/// Largest relative error between analytic and finite-difference gradients.
#[wasm_bindgen(js_name = gradientCheck)]
pub fn gradient_check(
    users: usize,
    block_len: usize,
    instances: usize,
    seed: u64,
) -> Result<f64, JsError> {
    run_gradient_check(users, block_len, instances, seed)
        .map(|r| r.max_relative_error)
        .map_err(js_error)
}
