//! Keypoint-increase metrics (AKI, K_Gain), embedding cosine similarity and
//! report aggregation.

mod embedding;

pub use embedding::{
    load_embedding, parse_embedding, save_embedding_binary, save_embedding_json, EmbeddingVector,
    EMBEDDING_MAGIC,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no samples")]
    NoSamples,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("invalid embedding: {0}")]
    Embedding(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Absolute keypoint increase: refined count minus baseline count.
pub fn compute_aki(n_refined: usize, n_base: usize) -> i64 {
    n_refined as i64 - n_base as i64
}

/// Fraction of samples whose AKI is strictly greater than `tau`.
pub fn compute_k_gain(akis: &[i64], tau: i64) -> Result<f64> {
    if akis.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    Ok(count_improved(akis, tau) as f64 / akis.len() as f64)
}

pub fn count_improved(akis: &[i64], tau: i64) -> usize {
    akis.iter().filter(|&&a| a > tau).count()
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    cosine(&a.values, &b.values)
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MetricsError::DimMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Per-sample counts; `aki` always equals `n_refined - n_base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub sample_id: String,
    pub n_base: usize,
    pub n_refined: usize,
    pub aki: i64,
    /// Unverified mutual-nearest-neighbour counts, reported for transparency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_base: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_refined: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_i: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dino: Option<f64>,
}

impl SampleResult {
    pub fn new(sample_id: impl Into<String>, n_base: usize, n_refined: usize) -> Self {
        Self {
            sample_id: sample_id.into(),
            n_base,
            n_refined,
            aki: compute_aki(n_refined, n_base),
            raw_base: None,
            raw_refined: None,
            clip_i: None,
            dino: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub n_samples: usize,
    pub n_improved: usize,
    pub mean_aki: f64,
    pub k_gain: f64,
    /// `k_gain` as a percentage with one decimal, e.g. `"91.2%"`.
    pub k_gain_percent: String,
    pub tau: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_clip_i: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_dino: Option<f64>,
}

pub fn format_percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

fn mean_present(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean AKI, K_Gain and means of whichever similarity fields are present.
pub fn aggregate(results: &[SampleResult], tau: i64) -> Result<ReportSummary> {
    if results.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    let n = results.len();
    let akis: Vec<i64> = results.iter().map(|r| r.aki).collect();
    let sum_ref: i128 = results.iter().map(|r| r.n_refined as i128).sum();
    let sum_base: i128 = results.iter().map(|r| r.n_base as i128).sum();
    let k_gain = compute_k_gain(&akis, tau)?;
    Ok(ReportSummary {
        n_samples: n,
        n_improved: count_improved(&akis, tau),
        mean_aki: (sum_ref - sum_base) as f64 / n as f64,
        k_gain,
        k_gain_percent: format_percent(k_gain),
        tau,
        mean_clip_i: mean_present(results.iter().map(|r| r.clip_i)),
        mean_dino: mean_present(results.iter().map(|r| r.dino)),
    })
}
