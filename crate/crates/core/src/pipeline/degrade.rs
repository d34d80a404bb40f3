use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{DegradedObservation, MultiComponentImage};
use crate::operators::DegradationOperator;

/// Acquisition model: `b × b` uniform blur, random decimation keeping
/// `K = ⌊(1 − decimation) N⌋` pixels per band, white Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub noise_std: f64,
    pub blur: usize,
    pub decimation: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            noise_std: 5.0,
            blur: 3,
            decimation: 0.9,
        }
    }
}

impl Scenario {
    /// No blur, no decimation, no noise.
    pub fn identity() -> Self {
        Self {
            noise_std: 0.0,
            blur: 1,
            decimation: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise std must be nonnegative, got {}", self.noise_std)));
        }
        if !(0.0..1.0).contains(&self.decimation) {
            return Err(Error::Config(format!("decimation must lie in [0, 1), got {}", self.decimation)));
        }
        if self.blur == 0 {
            return Err(Error::Config("blur size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `K = ⌊(1 − decimation) N⌋`; the small slack keeps exact products such as
/// `0.5 · 10` from rounding down.
pub fn kept_count(pixels: usize, decimation: f64) -> Result<usize> {
    let k = ((1.0 - decimation) * pixels as f64 + 1e-9).floor() as usize;
    if k == 0 {
        return Err(Error::Config(format!(
            "decimation {decimation} keeps no sample of {pixels} pixels"
        )));
    }
    Ok(k.min(pixels))
}

/// Simulate `z_r = D_r B x̄_r + ε_r`.
///
/// The generator is ChaCha8 seeded with `seed`; for each band in order the
/// mask is drawn first (`K` distinct indices, then sorted), then its `K`
/// noise samples.
pub fn degrade(x: &MultiComponentImage, scenario: &Scenario, seed: u64) -> Result<DegradedObservation> {
    scenario.validate()?;
    let dims = x.dims();
    let n = dims.pixels();
    let k = kept_count(n, scenario.decimation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, scenario.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let mut masks = Vec::with_capacity(dims.components);
    let mut eps = Vec::with_capacity(k * dims.components);
    for _ in 0..dims.components {
        let mut mask = rand::seq::index::sample(&mut rng, n, k).into_vec();
        mask.sort_unstable();
        masks.push(mask);
        eps.extend((0..k).map(|_| noise.sample(&mut rng)));
    }
    let a = DegradationOperator::new(dims, scenario.blur, masks.clone())?;
    let mut z = a.apply(x)?;
    for (v, e) in z.iter_mut().zip(&eps) {
        *v += e;
    }
    DegradedObservation::new(dims, scenario.blur, masks, z)
}
