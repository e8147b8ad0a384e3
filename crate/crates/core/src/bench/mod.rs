//! Benchmark harness: manifests, quality filtering, evaluation, the
//! crop-refine-blend orchestrator and report/plot emission.

mod corpus;
mod crops;
mod eval;
mod manifest;
mod refine;
mod scatter;

pub use corpus::{synthetic_corpus, CorpusOptions};
pub use crops::{export_subject_crops, stratified_subset, CropManifest, CropManifestEntry};
pub use eval::{
    quality_filter, run_eval, EmbeddingIndex, EvalReport, FilterLog, FilterRecord, GroupSummary,
    Skip, REPORT_SCHEMA,
};
pub use manifest::{
    load_manifest, parse_manifest, save_manifest, Manifest, ManifestEntry, MANIFEST_SCHEMA,
};
pub use refine::{
    run_refine, ExternalRefiner, IdentityRefiner, RefineJob, RefineOutcome, RefineRecord, Refiner,
    WarpRefiner,
};
pub use scatter::{emit_scatter, read_scatter_csv, ScatterFormat, ScatterRow};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cropblend::{BlendMode, CropConfig};
use crate::matching::MatcherConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("duplicate sample_id {0}")]
    DuplicateId(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("all {0} samples were skipped")]
    AllSkipped(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("report has no samples")]
    EmptyReport,
}

impl BenchError {
    pub(crate) fn io(path: &Path, e: impl ToString) -> Self {
        BenchError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// Settings shared by the harness commands; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub matcher: MatcherConfig,
    pub crop: CropConfig,
    pub blend_mode: BlendMode,
    /// Improvement threshold in match-count units.
    pub tau: i64,
    /// Quality-filter threshold on the verified match count.
    pub min_matches: usize,
    /// Count matches on the subject crop instead of the full image.
    pub on_crop: bool,
    /// Worker threads; 0 means one per processor.
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            matcher: MatcherConfig::default(),
            crop: CropConfig::default(),
            blend_mode: BlendMode::Seamless,
            tau: 0,
            min_matches: 10,
            on_crop: false,
            workers: 0,
        }
    }
}

/// Runs `f` on a pool of `workers` threads (0 = rayon default).
pub(crate) fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
