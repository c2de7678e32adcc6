use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::PowerFit;

/// Accuracy below which synthetic measurements are clamped.
const FLOOR: f64 = 1e-6;

/// A learner whose accuracy follows a known power curve, plus seeded uniform
/// noise in `[-noise, noise]`. The draw depends only on the seed, the
/// position and the stream, never on call order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLearner {
    pub curve: PowerFit,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticLearner {
    pub fn new(curve: PowerFit, noise: f64, seed: u64) -> Result<Self> {
        PowerFit::new(curve.a, curve.b, curve.c)?;
        if !(curve.c > 0.0 && curve.c <= 100.0) {
            return Err(Error::InvalidLearner(format!(
                "asymptote {} is outside (0, 100]",
                curve.c
            )));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::InvalidLearner(format!(
                "noise {noise} must be nonnegative"
            )));
        }
        Ok(SyntheticLearner { curve, noise, seed })
    }

    pub fn from_parameters(a: f64, b: f64, c: f64, noise: f64, seed: u64) -> Result<Self> {
        Self::new(PowerFit::new(a, b, c)?, noise, seed)
    }

    pub fn accuracy_at(&self, position: u64, stream: u64) -> f64 {
        let exact = self.curve.c - self.curve.a * (position.max(1) as f64).powf(-self.curve.b);
        let jitter = if self.noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, position, stream));
            rng.gen_range(-self.noise..=self.noise)
        } else {
            0.0
        };
        (exact + jitter).clamp(FLOOR, 100.0)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(seed: u64, position: u64, stream: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ position) ^ stream)
}
