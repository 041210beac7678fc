//! Deterministic derivation of independent PRNG streams from one base seed.
//!
//! Every stage that draws randomness derives its own stream from the
//! scenario seed and a fixed tag, so stages and per-user work can run in any
//! order (or in parallel) without changing a single drawn value.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream tags, one per independent consumer of randomness.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    /// Scenario geometry and channel draws (single sequential stream).
    ScenarioChannels,
    /// Noise-level calibration draw.
    Calibration,
    /// Pilot-phase receiver noise for one user.
    PilotNoise { user: usize },
    /// Baseline configurations for one user in the evaluation report.
    BaselineConfigs { user: usize },
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::ScenarioChannels => 1,
            Stream::Calibration => 2,
            Stream::PilotNoise { user } => 0x1000 + user as u64,
            Stream::BaselineConfigs { user } => 0x2000_0000 + user as u64,
        }
    }
}

/// splitmix64 finalizer; decorrelates seed/tag pairs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// PRNG for `stream` derived from the base seed.
pub fn rng_for(base_seed: u64, stream: Stream) -> ChaCha12Rng {
    let derived = mix(mix(base_seed) ^ stream.tag());
    ChaCha12Rng::seed_from_u64(derived)
}
