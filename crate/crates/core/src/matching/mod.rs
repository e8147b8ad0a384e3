//! Descriptor matching with geometric verification. The verified inlier
//! count between a reference and another image is the match count every
//! metric is built on.

mod descriptor_match;
mod external;
mod model;
mod ransac;

pub use descriptor_match::{match_descriptors, mutual_nearest};
pub use external::{
    export_matches, import_matches, load_external_matches, parse_external_matches,
    save_external_matches, ExternalMatchFile, ExternalPair, ImportedMatches, EXTERNAL_MATCH_SCHEMA,
};
pub use model::{estimate_model, project, GeomModel, ModelKind, PointPair};
pub use ransac::{transfer_error, verify_correspondences, RansacConfig, Verification};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::Image;
use crate::keypoints::{detect_and_describe, DetectorConfig, KeypointError, KeypointSet};

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("ratio must be in (0, 1], got {0}")]
    InvalidRatio(f64),
    #[error("need at least {needed} correspondences, got {got}")]
    InsufficientPairs { needed: usize, got: usize },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("external match schema violation: {0}")]
    Schema(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error(transparent)]
    Keypoint(#[from] KeypointError),
}

pub type Result<T> = std::result::Result<T, MatchError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    pub idx_a: usize,
    pub idx_b: usize,
    /// Hamming distance in bits.
    pub distance: u32,
}

/// Candidate matches plus the verified model and per-match inlier flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub matches: Vec<Match>,
    pub model: Option<GeomModel>,
    pub inlier_mask: Vec<bool>,
    pub rng_seed: u64,
    pub iterations: usize,
}

impl MatchSet {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&m| m).count()
    }

    pub fn raw_count(&self) -> usize {
        self.matches.len()
    }

    pub fn inliers(&self) -> impl Iterator<Item = &Match> {
        self.matches
            .iter()
            .zip(&self.inlier_mask)
            .filter(|(_, &m)| m)
            .map(|(m, _)| m)
    }
}

/// Verifies descriptor matches between `a` and `b` with RANSAC on their
/// level-0 keypoint positions.
pub fn ransac_verify(
    matches: &[Match],
    a: &KeypointSet,
    b: &KeypointSet,
    cfg: &RansacConfig,
) -> MatchSet {
    let pairs: Vec<PointPair> = matches
        .iter()
        .map(|m| (a.position(m.idx_a), b.position(m.idx_b)))
        .collect();
    let v = verify_correspondences(&pairs, cfg);
    MatchSet {
        matches: matches.to_vec(),
        model: v.model,
        inlier_mask: v.inlier_mask,
        rng_seed: cfg.seed,
        iterations: v.iterations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatcherConfig {
    pub detector: DetectorConfig,
    pub ratio: f64,
    pub ransac: RansacConfig,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            ratio: 0.8,
            ransac: RansacConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MatchCount {
    /// Verified inlier count.
    pub count: usize,
    /// Mutual-nearest-neighbour matches before verification.
    pub raw_count: usize,
    pub matchset: MatchSet,
    pub kps_ref: KeypointSet,
    pub kps_other: KeypointSet,
}

/// Matches two precomputed keypoint sets and verifies them.
pub fn match_keypoint_sets(
    a: &KeypointSet,
    b: &KeypointSet,
    cfg: &MatcherConfig,
) -> Result<MatchSet> {
    let m = match_descriptors(&a.descriptors, &b.descriptors, cfg.ratio)?;
    Ok(ransac_verify(&m, a, b, &cfg.ransac))
}

/// Detect, describe, match and verify; `count` is the verified inlier count.
pub fn match_count(img_ref: &Image, img_other: &Image, cfg: &MatcherConfig) -> Result<MatchCount> {
    let kps_ref = detect_and_describe(img_ref, "ref", &cfg.detector)?;
    let kps_other = detect_and_describe(img_other, "other", &cfg.detector)?;
    let matchset = match_keypoint_sets(&kps_ref, &kps_other, cfg)?;
    Ok(MatchCount {
        count: matchset.inlier_count(),
        raw_count: matchset.raw_count(),
        matchset,
        kps_ref,
        kps_other,
    })
}
