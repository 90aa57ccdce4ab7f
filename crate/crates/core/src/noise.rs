//! Deterministic per-trial random streams.
//!
//! A trial seed is expanded into independent named streams (one per noise
//! source) with splitmix64, so adding a source never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Named noise sources used by a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    EncoderRight,
    EncoderLeft,
    Lidar,
}

impl Stream {
    pub fn name(self) -> &'static str {
        match self {
            Stream::EncoderRight => "encoder_r",
            Stream::EncoderLeft => "encoder_l",
            Stream::Lidar => "lidar",
        }
    }
}

/// One step of the splitmix64 generator.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `index` of a run seeded with `base`.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

/// 32-byte ChaCha key for a named stream of a trial.
pub fn stream_key(trial_seed: u64, stream: Stream) -> [u8; 32] {
    // FNV-1a of the stream name keeps the mapping stable across enum reorderings
    let mut tag: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.name().bytes() {
        tag ^= u64::from(b);
        tag = tag.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut state = trial_seed ^ tag;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

pub fn stream_rng(trial_seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_key(trial_seed, stream))
}

/// Zero-mean Gaussian source; σ = 0 or a disabled source returns exact zeros
/// without consuming randomness.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    pub fn new(trial_seed: u64, stream: Stream) -> Self {
        Self { rng: stream_rng(trial_seed, stream) }
    }

    pub fn sample(&mut self, sigma: f64) -> f64 {
        if !(sigma > 0.0) {
            return 0.0;
        }
        let n = Normal::new(0.0, sigma).expect("positive finite sigma");
        n.sample(&mut self.rng)
    }
}
