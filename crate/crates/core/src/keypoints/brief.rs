//! Steered BRIEF: 256 intensity comparisons on a fixed, versioned pattern
//! rotated by the keypoint orientation.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::imgcore::{gaussian_blur, sample_bilinear, Image};

use super::pyramid::from_base;
use super::{Keypoint, Result};

/// Changing the pattern generator or its seed must bump this tag.
pub const PATTERN_VERSION: &str = "fastbrief-256-v1";
const PATTERN_SEED: u64 = 0x5EED_B21E_F256_0001;
const PATTERN_RADIUS: f64 = 15.0;
const PATTERN_SIGMA: f64 = 31.0 / 5.0;

/// Pre-blur applied once per octave image before sampling.
pub const DESCRIPTOR_SMOOTHING_SIGMA: f64 = 2.0;

/// Keypoints closer than this to their octave border are not described.
pub const DESCRIPTOR_BORDER: f64 = 20.0;

pub const DESCRIPTOR_BITS: usize = 256;
pub const DESCRIPTOR_BYTES: usize = DESCRIPTOR_BITS / 8;

/// 256-bit binary descriptor; bit `i` lives in word `i / 64`, position `i % 64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Descriptor(pub [u64; 4]);

impl Descriptor {
    pub fn bit(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    fn set_bit(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Little-endian packing: byte `j` holds bits `8j..8j+8`, LSB first.
    pub fn to_bytes(&self) -> [u8; DESCRIPTOR_BYTES] {
        let mut out = [0u8; DESCRIPTOR_BYTES];
        for (w, word) in self.0.iter().enumerate() {
            out[w * 8..w * 8 + 8].copy_from_slice(&word.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; DESCRIPTOR_BYTES]) -> Self {
        let mut words = [0u64; 4];
        for (w, word) in words.iter_mut().enumerate() {
            *word = u64::from_le_bytes(bytes[w * 8..w * 8 + 8].try_into().expect("8 bytes"));
        }
        Descriptor(words)
    }
}

/// One comparison: bit = 1 iff I(p) < I(q).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestPair {
    pub p: (f64, f64),
    pub q: (f64, f64),
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn gaussian(&mut self) -> f64 {
        // Box-Muller; u1 kept away from 0.
        let u1 = self.next_f64().max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// The fixed sampling pattern: isotropic Gaussian integer offsets inside a
/// radius-15 disk, generated from a versioned seed.
pub fn sampling_pattern() -> &'static [TestPair] {
    static PATTERN: OnceLock<Vec<TestPair>> = OnceLock::new();
    PATTERN.get_or_init(|| {
        let mut rng = SplitMix64(PATTERN_SEED);
        let point = |rng: &mut SplitMix64| loop {
            let x = (rng.gaussian() * PATTERN_SIGMA).round();
            let y = (rng.gaussian() * PATTERN_SIGMA).round();
            if x * x + y * y <= PATTERN_RADIUS * PATTERN_RADIUS {
                return (x, y);
            }
        };
        let mut pairs = Vec::with_capacity(DESCRIPTOR_BITS);
        while pairs.len() < DESCRIPTOR_BITS {
            let p = point(&mut rng);
            let q = point(&mut rng);
            if p != q {
                pairs.push(TestPair { p, q });
            }
        }
        pairs
    })
}

/// Descriptor of a keypoint at level coordinates `(x, y)` on an already
/// smoothed image.
pub fn describe_at(smoothed: &Image, x: f64, y: f64, angle: f64) -> Descriptor {
    let (s, c) = angle.sin_cos();
    let rot = |(dx, dy): (f64, f64)| (x + c * dx - s * dy, y + s * dx + c * dy);
    let mut d = Descriptor::default();
    for (i, pair) in sampling_pattern().iter().enumerate() {
        let (px, py) = rot(pair.p);
        let (qx, qy) = rot(pair.q);
        if sample_bilinear(smoothed, px, py, 0) < sample_bilinear(smoothed, qx, qy, 0) {
            d.set_bit(i);
        }
    }
    d
}

/// Output of [`compute_descriptors`]: surviving keypoints with their
/// descriptors, plus how many were dropped at the border.
#[derive(Clone, Debug)]
pub struct Described {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
    pub dropped: usize,
}

/// Computes steered BRIEF descriptors. `pyramid[k]` must be the octave image
/// for keypoints with `octave == k`; for a single image pass a one-element
/// slice. Keypoints within 20 px of their octave border are dropped.
pub fn compute_descriptors(pyramid: &[Image], kps: &[Keypoint]) -> Result<Described> {
    let Some(base) = pyramid.first() else {
        return Ok(Described {
            keypoints: Vec::new(),
            descriptors: Vec::new(),
            dropped: kps.len(),
        });
    };
    let base_dims = base.dims();
    let mut smoothed: Vec<Option<Image>> = vec![None; pyramid.len()];
    let mut out = Described {
        keypoints: Vec::with_capacity(kps.len()),
        descriptors: Vec::with_capacity(kps.len()),
        dropped: 0,
    };
    for kp in kps {
        let Some(level) = pyramid.get(kp.octave) else {
            out.dropped += 1;
            continue;
        };
        let (w, h) = level.dims();
        let lx = from_base(kp.x, w, base_dims.0);
        let ly = from_base(kp.y, h, base_dims.1);
        let inside = lx >= DESCRIPTOR_BORDER
            && ly >= DESCRIPTOR_BORDER
            && lx <= (w - 1) as f64 - DESCRIPTOR_BORDER
            && ly <= (h - 1) as f64 - DESCRIPTOR_BORDER;
        if !inside {
            out.dropped += 1;
            continue;
        }
        let img = match &smoothed[kp.octave] {
            Some(img) => img,
            None => {
                smoothed[kp.octave] = Some(gaussian_blur(level, DESCRIPTOR_SMOOTHING_SIGMA)?);
                smoothed[kp.octave].as_ref().expect("just set")
            }
        };
        out.descriptors
            .push(describe_at(img, lx, ly, kp.orientation));
        out.keypoints.push(*kp);
    }
    Ok(out)
}
