//! Seeded RANSAC with symmetric transfer error and least-squares refit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{estimate_model, GeomModel, ModelKind, PointPair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub kind: ModelKind,
    pub inlier_px: f64,
    pub max_iters: usize,
    /// Early-exit confidence; `1.0` disables early exit.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Homography,
            inlier_px: 3.0,
            max_iters: 2000,
            confidence: 0.995,
            seed: 42,
        }
    }
}

/// Result of verifying a list of point correspondences.
#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    pub model: Option<GeomModel>,
    pub inlier_mask: Vec<bool>,
    /// Hypotheses drawn, including degenerate samples.
    pub iterations: usize,
    /// Inlier count of the best minimal-sample hypothesis before refit.
    pub hypothesis_inliers: usize,
}

impl Verification {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&m| m).count()
    }

    fn empty(n: usize) -> Self {
        Self {
            model: None,
            inlier_mask: vec![false; n],
            iterations: 0,
            hypothesis_inliers: 0,
        }
    }
}

/// `max(|H a - b|, |H^-1 b - a|)`; infinite when either projection fails.
pub fn transfer_error(model: &GeomModel, inverse: &GeomModel, pair: &PointPair) -> f64 {
    let (a, b) = pair;
    let fwd = model.apply(*a).map(|p| (p[0] - b[0]).hypot(p[1] - b[1]));
    let bwd = inverse.apply(*b).map(|p| (p[0] - a[0]).hypot(p[1] - a[1]));
    match (fwd, bwd) {
        (Some(f), Some(g)) => f.max(g),
        _ => f64::INFINITY,
    }
}

fn score(model: &GeomModel, pairs: &[PointPair], inlier_px: f64) -> Option<Vec<bool>> {
    let inv = model.inverse()?;
    Some(
        pairs
            .iter()
            .map(|p| transfer_error(model, &inv, p) <= inlier_px)
            .collect(),
    )
}

fn count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&m| m).count()
}

/// Iterations needed to draw one all-inlier sample with the given confidence.
fn adaptive_bound(inlier_ratio: f64, sample_size: usize, confidence: f64) -> f64 {
    if confidence >= 1.0 {
        return f64::INFINITY;
    }
    let p_good = inlier_ratio.powi(sample_size as i32);
    if p_good >= 1.0 {
        return 0.0;
    }
    if p_good <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 - confidence).ln() / (1.0 - p_good).ln()
}

/// Robustly fits `cfg.kind` to `pairs`. Fewer pairs than a minimal sample
/// yields no model and an all-false mask.
pub fn verify_correspondences(pairs: &[PointPair], cfg: &RansacConfig) -> Verification {
    let n = pairs.len();
    let s = cfg.kind.min_samples();
    if n < s {
        return Verification::empty(n);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(GeomModel, Vec<bool>, usize)> = None;
    let mut iterations = 0;
    let mut bound = f64::INFINITY;
    let mut sample = Vec::with_capacity(s);
    while iterations < cfg.max_iters && (iterations as f64) < bound {
        iterations += 1;
        sample.clear();
        sample.extend(
            rand::seq::index::sample(&mut rng, n, s)
                .iter()
                .map(|i| pairs[i]),
        );
        let Ok(model) = estimate_model(&sample, cfg.kind) else {
            continue;
        };
        let Some(mask) = score(&model, pairs, cfg.inlier_px) else {
            continue;
        };
        let c = count(&mask);
        if best.as_ref().is_none_or(|b| c > b.2) {
            bound = adaptive_bound(c as f64 / n as f64, s, cfg.confidence);
            best = Some((model, mask, c));
        }
    }
    let Some((mut model, mut mask, hyp)) = best else {
        return Verification {
            iterations,
            ..Verification::empty(n)
        };
    };
    if hyp == 0 {
        return Verification {
            iterations,
            ..Verification::empty(n)
        };
    }
    let inliers: Vec<PointPair> = pairs
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(p, _)| *p)
        .collect();
    if let Ok(refit) = estimate_model(&inliers, cfg.kind) {
        if let Some(refit_mask) = score(&refit, pairs, cfg.inlier_px) {
            if count(&refit_mask) >= hyp {
                model = refit;
                mask = refit_mask;
            }
        }
    }
    Verification {
        model: Some(model),
        inlier_mask: mask,
        iterations,
        hypothesis_inliers: hyp,
    }
}
