//! Block-fading uplink scenarios.
//!
//! A scenario is the real-valued linear model `Y = H X + Z` over one
//! coherence block: `n` receive antennas, `K = n` single-antenna users spread
//! over one or more cells, and `T` channel uses during which `H` is fixed.
//! Symbols are i.i.d. unit-variance Laplacian scaled by `sqrt(snr)`; noise is
//! i.i.d. standard Gaussian. In noiseless mode symbols keep unit scale and no
//! noise is added.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{substream, Stream};
use crate::Matrix;

/// Smallest reciprocal condition number accepted for a channel draw.
pub const MIN_CHANNEL_RCOND: f64 = 1e-12;

/// Maximum number of channel draws before giving up.
pub const MAX_CHANNEL_DRAWS: usize = 100;

/// Signal-to-noise setting of a scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Snr {
    /// Unit-power symbols and no additive noise.
    Noiseless,
    /// Symbol power per channel use against unit-variance noise (linear scale).
    Linear(f64),
}

impl Snr {
    /// Amplitude applied to unit-variance symbols.
    pub fn symbol_scale(self) -> f64 {
        match self {
            Snr::Noiseless => 1.0,
            Snr::Linear(rho) => rho.sqrt(),
        }
    }

    /// Symbol power per channel use.
    pub fn power(self) -> f64 {
        match self {
            Snr::Noiseless => 1.0,
            Snr::Linear(rho) => rho,
        }
    }

    pub fn is_noiseless(self) -> bool {
        matches!(self, Snr::Noiseless)
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Snr::Noiseless => s.serialize_str("noiseless"),
            Snr::Linear(rho) => s.serialize_f64(*rho),
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Value(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Value(rho) => Ok(Snr::Linear(rho)),
            Raw::Tag(tag) if tag == "noiseless" => Ok(Snr::Noiseless),
            Raw::Tag(tag) => Err(serde::de::Error::custom(format!(
                "snr must be a number or \"noiseless\", got {tag:?}"
            ))),
        }
    }
}

/// Full description of one scenario family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_antennas: usize,
    pub cell_user_counts: Vec<usize>,
    pub coherence_block: usize,
    /// Support of the uniform per-user channel variance.
    pub attenuation_range: (f64, f64),
    pub snr: Snr,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Single-cell noiseless scenario with `n = K` users and the
    /// `[0.1, 1.9]` attenuation support.
    pub fn single_cell(users: usize, coherence_block: usize, seed: u64) -> Self {
        ScenarioConfig {
            num_antennas: users,
            cell_user_counts: vec![users],
            coherence_block,
            attenuation_range: (0.1, 1.9),
            snr: Snr::Noiseless,
            seed,
        }
    }

    pub fn total_users(&self) -> usize {
        self.cell_user_counts.iter().sum()
    }

    /// Cell index of every user row, in order.
    pub fn cell_of_row(&self) -> Vec<usize> {
        self.cell_user_counts
            .iter()
            .enumerate()
            .flat_map(|(cell, &count)| std::iter::repeat_n(cell, count))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.cell_user_counts.is_empty() {
            return bad("cell_user_counts must list at least one cell".into());
        }
        if let Some(cell) = self.cell_user_counts.iter().position(|&c| c == 0) {
            return bad(format!("cell {cell} has no users"));
        }
        let k = self.total_users();
        if self.num_antennas != k {
            return bad(format!(
                "num_antennas ({}) must equal the total user count ({k})",
                self.num_antennas
            ));
        }
        if self.coherence_block <= 2 * k {
            return bad(format!(
                "coherence_block ({}) must exceed 2K = {}",
                self.coherence_block,
                2 * k
            ));
        }
        let (low, high) = self.attenuation_range;
        if !(low.is_finite() && high.is_finite() && low > 0.0 && low <= high) {
            return bad(format!(
                "attenuation_range must satisfy 0 < low <= high, got ({low}, {high})"
            ));
        }
        if let Snr::Linear(rho) = self.snr {
            if !(rho.is_finite() && rho >= 0.0) {
                return bad(format!("snr must be finite and nonnegative, got {rho}"));
            }
        }
        Ok(())
    }
}

/// Channel matrix `H` (n x K) with the per-user variances it was drawn with.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMatrix {
    pub entries: Matrix,
    pub per_user_variance: Vec<f64>,
}

impl ChannelMatrix {
    /// Wraps a known channel, e.g. the identity in tests.
    pub fn from_entries(entries: Matrix) -> Self {
        let per_user_variance = vec![1.0; entries.ncols()];
        ChannelMatrix {
            entries,
            per_user_variance,
        }
    }
}

/// Transmitted symbols `X` (K x T).
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolBlock {
    pub entries: Matrix,
    pub cell_of_row: Vec<usize>,
}

impl SymbolBlock {
    pub fn new(entries: Matrix, cell_of_row: Vec<usize>) -> Result<Self> {
        if cell_of_row.len() != entries.nrows() {
            return Err(Error::DimensionMismatch {
                context: "symbol block cell map",
                expected: (entries.nrows(), 1),
                found: (cell_of_row.len(), 1),
            });
        }
        Ok(SymbolBlock {
            entries,
            cell_of_row,
        })
    }

    /// Single-cell block.
    pub fn single_cell(entries: Matrix) -> Self {
        let cell_of_row = vec![0; entries.nrows()];
        SymbolBlock {
            entries,
            cell_of_row,
        }
    }

    pub fn users(&self) -> usize {
        self.entries.nrows()
    }

    pub fn block_len(&self) -> usize {
        self.entries.ncols()
    }

    /// Squared norm of every user's symbol stream.
    pub fn row_energies(&self) -> Vec<f64> {
        self.entries
            .row_iter()
            .map(|row| row.norm_squared())
            .collect()
    }
}

/// Received block `Y` (n x T).
#[derive(Clone, Debug, PartialEq)]
pub struct ReceivedBlock {
    pub entries: Matrix,
}

impl ReceivedBlock {
    pub fn new(entries: Matrix) -> Self {
        ReceivedBlock { entries }
    }

    pub fn antennas(&self) -> usize {
        self.entries.nrows()
    }

    pub fn block_len(&self) -> usize {
        self.entries.ncols()
    }
}

/// One realization of a scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub channel: ChannelMatrix,
    pub symbols: SymbolBlock,
    pub received: ReceivedBlock,
}

impl Scenario {
    /// Draws channel, symbols and noise from independent streams of `seed`.
    ///
    /// Channels do not depend on `coherence_block`, and the symbols and noise
    /// of a shorter block are a prefix of those of a longer one, so two
    /// configs differing only in `T` share their first columns.
    pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let channel = generate_channel(config, &mut substream(seed, Stream::Channel))?;
        let symbols = generate_symbols(config, &mut substream(seed, Stream::Symbols))?;
        let received = synthesize_received(
            &channel,
            &symbols,
            config,
            &mut substream(seed, Stream::Noise),
        )?;
        Ok(Scenario {
            channel,
            symbols,
            received,
        })
    }
}

/// Unit-variance Laplacian by inverse CDF of `u` in (-1/2, 1/2).
pub fn laplacian_from_uniform(u: f64) -> f64 {
    -FRAC_1_SQRT_2 * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Draws one zero-mean unit-variance Laplacian sample.
pub fn sample_laplacian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = rng.random::<f64>() - 0.5;
        // u = -1/2 maps to an infinite sample.
        if u > -0.5 {
            return laplacian_from_uniform(u);
        }
    }
}

/// Draws `H` with column `k` i.i.d. `N(0, v_k)` and `v_k ~ U[low, high]`.
pub fn generate_channel<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    config.validate()?;
    let n = config.num_antennas;
    let k = config.total_users();
    let (low, high) = config.attenuation_range;
    for _ in 0..MAX_CHANNEL_DRAWS {
        let per_user_variance: Vec<f64> = (0..k)
            .map(|_| low + (high - low) * rng.random::<f64>())
            .collect();
        let mut entries = Matrix::zeros(n, k);
        for (col, &var) in per_user_variance.iter().enumerate() {
            let std = var.sqrt();
            for row in 0..n {
                let g: f64 = rng.sample(StandardNormal);
                entries[(row, col)] = std * g;
            }
        }
        if linalg::reciprocal_condition(&entries) > MIN_CHANNEL_RCOND {
            return Ok(ChannelMatrix {
                entries,
                per_user_variance,
            });
        }
    }
    Err(Error::RetryLimit {
        what: "channel",
        attempts: MAX_CHANNEL_DRAWS,
    })
}

/// Draws `X` one channel use (column) at a time.
pub fn generate_symbols<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<SymbolBlock> {
    config.validate()?;
    let k = config.total_users();
    let t = config.coherence_block;
    let scale = config.snr.symbol_scale();
    let mut entries = Matrix::zeros(k, t);
    for col in 0..t {
        for row in 0..k {
            entries[(row, col)] = scale * sample_laplacian(rng);
        }
    }
    SymbolBlock::new(entries, config.cell_of_row())
}

/// `Y = H X + Z`; `Z` is omitted in noiseless mode.
pub fn synthesize_received<R: Rng + ?Sized>(
    channel: &ChannelMatrix,
    symbols: &SymbolBlock,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<ReceivedBlock> {
    let h = &channel.entries;
    let x = &symbols.entries;
    if h.ncols() != x.nrows() {
        return Err(Error::DimensionMismatch {
            context: "H X product",
            expected: (h.nrows(), x.nrows()),
            found: h.shape(),
        });
    }
    let mut y = h * x;
    if !config.snr.is_noiseless() {
        for col in 0..y.ncols() {
            for row in 0..y.nrows() {
                let z: f64 = rng.sample(StandardNormal);
                y[(row, col)] += z;
            }
        }
    }
    Ok(ReceivedBlock::new(y))
}
