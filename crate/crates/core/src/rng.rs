//! Per-trial random streams.
//!
//! Every trial owns an independent ChaCha8 stream whose seed is the 64-bit
//! finalizer of `(master_seed, trial_index)`, so trials can run in any order
//! or on any number of workers and still reproduce bit for bit. Gaussians
//! come from Box-Muller on that stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream for `trial` under `master_seed`.
pub fn mix_seed(master_seed: u64, trial: u64) -> u64 {
    finalize(master_seed ^ finalize(trial.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub struct TrialRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl TrialRng {
    pub fn new(master_seed: u64, trial: u64) -> Self {
        Self::from_seed(mix_seed(master_seed, trial))
    }

    pub fn from_seed(seed: u64) -> Self {
        TrialRng { inner: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Standard normal via Box-Muller; the second variate of each pair is
    /// cached for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}
