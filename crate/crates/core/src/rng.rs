//! Seeded random streams.
//!
//! Every random quantity in a trial comes from its own ChaCha stream keyed by
//! the trial seed, so channels, symbols, noise and optimizer draws never share
//! state and a change in one (e.g. a longer block) leaves the others intact.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Independent purposes a trial draws randomness for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Channel,
    Symbols,
    Noise,
    Optimizer,
    GradCheck,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Channel => 1,
            Stream::Symbols => 2,
            Stream::Noise => 3,
            Stream::Optimizer => 4,
            Stream::GradCheck => 5,
        }
    }
}

/// Generator for `stream` under `seed`.
pub fn substream(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under a master seed.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64))
}
