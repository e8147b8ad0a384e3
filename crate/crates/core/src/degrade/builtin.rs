//! Band-split stand-in for one-step diffusion denoising: attenuates the
//! high band and injects noise scaled by local gradient strength.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::imgcore::{gaussian_blur, gradient_magnitude, to_grayscale, Image};

use super::{DegradeError, Result};

/// Scale separating the preserved low band from the perturbed high band.
pub const LOW_BAND_SIGMA: f64 = 3.0;

/// Amplitude of the gradient-modulated noise at full strength.
pub const NOISE_GAIN: f64 = 0.02;

/// Normalized gradient magnitude of the luma, in `[0, 1]`; all zeros for a
/// constant image.
pub fn detail_weight(img: &Image) -> Result<Vec<f64>> {
    let g = gradient_magnitude(&to_grayscale(img))?;
    let max = g.max();
    Ok(if max > 0.0 {
        g.values().iter().map(|v| v / max).collect()
    } else {
        vec![0.0; g.values().len()]
    })
}

/// `low + (1 - s) high + s k eta A`, clamped to `[0, 1]`, where `low` is the
/// sigma-3 blur, `high = img - low`, `eta` seeded standard normal noise and
/// `A` the normalized gradient magnitude.
pub fn degrade_builtin(img: &Image, strength: f64, seed: u64) -> Result<Image> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(DegradeError::InvalidSpec(format!(
            "strength {strength} not in [0, 1]"
        )));
    }
    if strength == 0.0 {
        return Ok(img.clone());
    }
    let low = gaussian_blur(img, LOW_BAND_SIGMA)?;
    let a = detail_weight(img)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = img.channels();
    let mut out = img.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let lo = low.data()[i] as f64;
        let hi = *v as f64 - lo;
        let eta: f64 = StandardNormal.sample(&mut rng);
        let y = lo + (1.0 - strength) * hi + strength * NOISE_GAIN * eta * a[i / c];
        *v = y.clamp(0.0, 1.0) as f32;
    }
    Ok(out)
}

/// Control degrader: the same noise without gradient modulation.
pub fn uniform_noise(img: &Image, sigma: f64, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.clone();
    for v in out.data_mut() {
        let eta: f64 = StandardNormal.sample(&mut rng);
        *v = (*v as f64 + sigma * eta).clamp(0.0, 1.0) as f32;
    }
    out
}
