//! Seeded reference augmentation: crop, rotation and per-channel gain/offset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imgcore::{rotate_about_center, Image};

use super::{DegradeError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSpec {
    /// Side fraction of the crop window, `[lo, hi]` within `(0.5, 1]`.
    pub crop_fraction: [f64; 2],
    /// Degrees, within `[-30, 30]`.
    pub rotation_deg: [f64; 2],
    /// Per-channel gain, within `[0.8, 1.2]`.
    pub gain: [f64; 2],
    /// Per-channel offset, within `[-0.05, 0.05]`.
    pub offset: [f64; 2],
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            crop_fraction: [0.75, 1.0],
            rotation_deg: [-15.0, 15.0],
            gain: [0.9, 1.1],
            offset: [-0.05, 0.05],
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn identity(seed: u64) -> Self {
        Self {
            crop_fraction: [1.0, 1.0],
            rotation_deg: [0.0, 0.0],
            gain: [1.0, 1.0],
            offset: [0.0, 0.0],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, r: [f64; 2], ok: &dyn Fn(f64) -> bool| {
            if r[0].is_nan() || r[1].is_nan() || r[0] > r[1] || !ok(r[0]) || !ok(r[1]) {
                return Err(DegradeError::InvalidSpec(format!(
                    "{name} range {r:?} out of bounds"
                )));
            }
            Ok(())
        };
        check("crop_fraction", self.crop_fraction, &|v| {
            v > 0.5 && v <= 1.0
        })?;
        check("rotation_deg", self.rotation_deg, &|v| v.abs() <= 30.0)?;
        check("gain", self.gain, &|v| (0.8..=1.2).contains(&v))?;
        check("offset", self.offset, &|v| (-0.05..=0.05).contains(&v))
    }
}

/// The parameters actually drawn, recorded so the output can be rebuilt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    /// `[x0, y0, w, h]` of the crop window.
    pub crop: [usize; 4],
    pub rotation_deg: f64,
    pub gains: Vec<f64>,
    pub offsets: Vec<f64>,
}

fn draw(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..=r[1])
    }
}

/// Crop (kept at crop size), rotate about the centre with bilinear sampling
/// and clamped borders, then apply `v * gain + offset` per channel.
pub fn augment_reference(img: &Image, spec: &AugmentSpec) -> Result<(Image, AugmentParams)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = img.dims();
    let f = draw(&mut rng, spec.crop_fraction);
    let cw = ((w as f64 * f).round() as usize).clamp(1, w);
    let ch = ((h as f64 * f).round() as usize).clamp(1, h);
    let x0 = if cw < w { rng.gen_range(0..=w - cw) } else { 0 };
    let y0 = if ch < h { rng.gen_range(0..=h - ch) } else { 0 };
    let rotation_deg = draw(&mut rng, spec.rotation_deg);
    let gains: Vec<f64> = (0..img.channels())
        .map(|_| draw(&mut rng, spec.gain))
        .collect();
    let offsets: Vec<f64> = (0..img.channels())
        .map(|_| draw(&mut rng, spec.offset))
        .collect();

    let cropped = if (cw, ch) == (w, h) {
        img.clone()
    } else {
        let c = img.channels();
        let mut data = Vec::with_capacity(cw * ch * c);
        for y in y0..y0 + ch {
            let start = (y * w + x0) * c;
            data.extend_from_slice(&img.data()[start..start + cw * c]);
        }
        Image::new(cw, ch, c, data)?
    };
    let mut out = rotate_about_center(&cropped, rotation_deg);
    let c = out.channels();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let k = i % c;
        if gains[k] != 1.0 || offsets[k] != 0.0 {
            *v = (*v as f64 * gains[k] + offsets[k]).clamp(0.0, 1.0) as f32;
        }
    }
    Ok((
        out,
        AugmentParams {
            crop: [x0, y0, cw, ch],
            rotation_deg,
            gains,
            offsets,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture_image;

    #[test]
    fn identity_spec_is_identity() {
        let img = texture_image(50, 40, 1);
        let (out, p) = augment_reference(&img, &AugmentSpec::identity(3)).unwrap();
        assert_eq!(out, img);
        assert_eq!(p.crop, [0, 0, 50, 40]);
    }

    #[test]
    fn same_seed_same_output() {
        let img = texture_image(50, 40, 2);
        let spec = AugmentSpec {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(
            augment_reference(&img, &spec).unwrap(),
            augment_reference(&img, &spec).unwrap()
        );
    }

    #[test]
    fn drawn_parameters_within_ranges() {
        let img = texture_image(64, 48, 3);
        for seed in 0..20 {
            let spec = AugmentSpec {
                seed,
                ..Default::default()
            };
            let (out, p) = augment_reference(&img, &spec).unwrap();
            assert_eq!(out.dims(), (p.crop[2], p.crop[3]));
            assert!(p.crop[2] >= 48 && p.crop[0] + p.crop[2] <= 64);
            assert!(p.rotation_deg.abs() <= 15.0);
            assert!(p.gains.iter().all(|g| (0.9..=1.1).contains(g)));
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        let bad = [
            AugmentSpec {
                crop_fraction: [0.5, 1.0],
                ..Default::default()
            },
            AugmentSpec {
                rotation_deg: [-31.0, 0.0],
                ..Default::default()
            },
            AugmentSpec {
                gain: [1.1, 0.9],
                ..Default::default()
            },
            AugmentSpec {
                offset: [0.0, 0.06],
                ..Default::default()
            },
        ];
        for s in bad {
            assert!(s.validate().is_err(), "{s:?}");
        }
    }
}
