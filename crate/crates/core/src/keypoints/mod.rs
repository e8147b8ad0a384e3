//! Oriented FAST-9 keypoints with steered BRIEF descriptors over a scale
//! pyramid. This is the built-in front end of the matcher.

mod brief;
mod fast;
mod pyramid;

pub use brief::{
    compute_descriptors, describe_at, sampling_pattern, Described, Descriptor, TestPair,
    DESCRIPTOR_BITS, DESCRIPTOR_BORDER, DESCRIPTOR_BYTES, DESCRIPTOR_SMOOTHING_SIGMA,
    PATTERN_VERSION,
};
pub use fast::{corner_score, intensity_centroid_angle, ARC_LEN, CIRCLE, ORIENTATION_RADIUS};
pub use pyramid::{build_pyramid, from_base, level_side, to_base, MIN_LEVEL_SIDE};

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{to_grayscale, Image, ImageError};

#[derive(Debug, Error)]
pub enum KeypointError {
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("malformed keypoint set: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, KeypointError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    /// Level-0 coordinates; pixel `i` is centered at `i`.
    pub x: f64,
    pub y: f64,
    /// Radians in `[-pi, pi]`.
    #[serde(rename = "angle")]
    pub orientation: f64,
    pub response: f64,
    pub octave: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// FAST intensity delta on the `[0, 1]` scale.
    pub threshold: f32,
    pub levels: usize,
    pub scale_factor: f64,
    pub max_per_level: usize,
    pub max_total: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 20.0 / 255.0,
            levels: 8,
            scale_factor: 1.2,
            max_per_level: 500,
            max_total: 2000,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(KeypointError::InvalidConfig("threshold must be > 0".into()));
        }
        if self.levels == 0 {
            return Err(KeypointError::InvalidConfig("levels must be >= 1".into()));
        }
        if self.scale_factor.is_nan() || self.scale_factor <= 1.0 {
            return Err(KeypointError::InvalidConfig(
                "scale_factor must be > 1".into(),
            ));
        }
        Ok(())
    }
}

/// FAST-9 detection on every pyramid level with 3x3 non-maximum suppression
/// and intensity-centroid orientation. Keeps the `max_per_level` strongest
/// corners per level; coordinates are mapped back to level 0.
pub fn detect_keypoints(pyramid: &[Image], threshold: f32, max_per_level: usize) -> Vec<Keypoint> {
    detect_with_border(pyramid, threshold, max_per_level, 3)
}

fn detect_with_border(
    pyramid: &[Image],
    threshold: f32,
    max_per_level: usize,
    border: usize,
) -> Vec<Keypoint> {
    let Some(base) = pyramid.first() else {
        return Vec::new();
    };
    pyramid
        .iter()
        .enumerate()
        .flat_map(|(octave, level)| {
            fast::detect_level(level, octave, base.dims(), threshold, max_per_level, border)
        })
        .collect()
}

/// Detected keypoints with parallel descriptors for one image.
#[derive(Clone, Debug, PartialEq)]
pub struct KeypointSet {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
}

impl KeypointSet {
    pub fn empty(image_id: impl Into<String>, width: usize, height: usize) -> Self {
        Self {
            image_id: image_id.into(),
            width,
            height,
            keypoints: Vec::new(),
            descriptors: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        let k = &self.keypoints[i];
        [k.x, k.y]
    }

    pub fn to_json(&self) -> KeypointSetJson {
        let mut packed = Vec::with_capacity(self.descriptors.len() * DESCRIPTOR_BYTES);
        for d in &self.descriptors {
            packed.extend_from_slice(&d.to_bytes());
        }
        KeypointSetJson {
            image_id: self.image_id.clone(),
            dims: Dims {
                width: self.width,
                height: self.height,
            },
            keypoints: self.keypoints.clone(),
            descriptors: base64::engine::general_purpose::STANDARD.encode(packed),
            pattern_version: PATTERN_VERSION.to_string(),
        }
    }

    pub fn from_json(j: KeypointSetJson) -> Result<Self> {
        if j.pattern_version != PATTERN_VERSION {
            return Err(KeypointError::Format(format!(
                "pattern version {} is not {PATTERN_VERSION}",
                j.pattern_version
            )));
        }
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(j.descriptors.as_bytes())
            .map_err(|e| KeypointError::Format(format!("descriptors: {e}")))?;
        if bytes.len() != j.keypoints.len() * DESCRIPTOR_BYTES {
            return Err(KeypointError::Format(format!(
                "{} descriptor bytes for {} keypoints",
                bytes.len(),
                j.keypoints.len()
            )));
        }
        let descriptors = bytes
            .chunks_exact(DESCRIPTOR_BYTES)
            .map(|c| Descriptor::from_bytes(c.try_into().expect("chunk size")))
            .collect();
        Ok(Self {
            image_id: j.image_id,
            width: j.dims.width,
            height: j.dims.height,
            keypoints: j.keypoints,
            descriptors,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

/// Serialized form of a [`KeypointSet`]; descriptors are base64 of the
/// concatenated 32-byte packed bit strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointSetJson {
    pub image_id: String,
    pub dims: Dims,
    pub keypoints: Vec<Keypoint>,
    pub descriptors: String,
    pub pattern_version: String,
}

/// Grayscale, pyramid, FAST-9, steered BRIEF; the strongest `max_total`
/// described keypoints are kept, ordered by response.
pub fn detect_and_describe(
    img: &Image,
    image_id: impl Into<String>,
    cfg: &DetectorConfig,
) -> Result<KeypointSet> {
    cfg.validate()?;
    let gray = to_grayscale(img);
    let pyramid = build_pyramid(&gray, cfg.levels, cfg.scale_factor)?;
    // Detection skips the descriptor border up front so that per-level slots
    // are not spent on corners that could never be described.
    let border = DESCRIPTOR_BORDER as usize + 1;
    let kps = detect_with_border(&pyramid, cfg.threshold, cfg.max_per_level, border);
    let described = compute_descriptors(&pyramid, &kps)?;

    let mut order: Vec<usize> = (0..described.keypoints.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = &described.keypoints[a];
        let kb = &described.keypoints[b];
        kb.response
            .total_cmp(&ka.response)
            .then(ka.octave.cmp(&kb.octave))
            .then(ka.y.total_cmp(&kb.y))
            .then(ka.x.total_cmp(&kb.x))
    });
    order.truncate(cfg.max_total);
    let (w, h) = img.dims();
    Ok(KeypointSet {
        image_id: image_id.into(),
        width: w,
        height: h,
        keypoints: order.iter().map(|&i| described.keypoints[i]).collect(),
        descriptors: order.iter().map(|&i| described.descriptors[i]).collect(),
    })
}
