//! Quality filtering and AKI / K_Gain evaluation over a manifest.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cropblend::{extract_crop, subject_crop};
use crate::imgcore::{load_image, Image};
use crate::keypoints::{detect_and_describe, KeypointSet};
use crate::matching::{match_keypoint_sets, MatchSet};
use crate::metrics::{
    aggregate, cosine_similarity, load_embedding, EmbeddingVector, ReportSummary, SampleResult,
};

use super::{with_pool, BenchConfig, BenchError, Manifest, ManifestEntry, Result, TOOL_VERSION};

pub const REPORT_SCHEMA: &str = "fidelkit-report-v1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub sample_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub method_tag: String,
    pub backbone_tag: String,
    pub summary: ReportSummary,
}

/// Results and skips are ordered by sample_id; together they account for
/// every manifest entry exactly once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: String,
    pub tool_version: String,
    pub config: BenchConfig,
    pub rng_seed: u64,
    pub tau: i64,
    pub samples: Vec<SampleResult>,
    pub skips: Vec<Skip>,
    pub groups: Vec<GroupSummary>,
    pub overall: ReportSummary,
    /// Set by callers that want one; excluded from determinism comparisons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRecord {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    pub kept: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterLog {
    pub min_matches: usize,
    pub records: Vec<FilterRecord>,
}

/// Embeddings keyed by sample and role, loaded from files named
/// `{sample_id}.{subject|refined}.{clip|dino}.{json|bin}`.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingIndex {
    vectors: HashMap<(String, String, String), EmbeddingVector>,
}

impl EmbeddingIndex {
    pub fn insert(&mut self, sample_id: &str, role: &str, kind: &str, v: EmbeddingVector) {
        self.vectors.insert(
            (sample_id.to_string(), role.to_string(), kind.to_string()),
            v,
        );
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut idx = Self::default();
        let rd = std::fs::read_dir(dir).map_err(|e| BenchError::io(dir, e))?;
        for ent in rd {
            let path = ent.map_err(|e| BenchError::io(dir, e))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let parts: Vec<&str> = name.rsplitn(4, '.').collect();
            let [ext, kind, role, id] = parts[..] else {
                continue;
            };
            if !matches!(ext, "json" | "bin")
                || !matches!(kind, "clip" | "dino")
                || !matches!(role, "subject" | "refined")
            {
                continue;
            }
            let v = load_embedding(&path).map_err(|e| BenchError::io(&path, e))?;
            idx.insert(id, role, kind, v);
        }
        Ok(idx)
    }

    fn similarity(&self, sample_id: &str, kind: &str) -> Option<f64> {
        let key = |role: &str| (sample_id.to_string(), role.to_string(), kind.to_string());
        let a = self.vectors.get(&key("subject"))?;
        let b = self.vectors.get(&key("refined"))?;
        match cosine_similarity(a, b) {
            Ok(c) => Some(c),
            Err(e) => {
                log::warn!("{sample_id}: {kind} similarity unavailable: {e}");
                None
            }
        }
    }
}

fn load(m: &Manifest, p: &str, what: &str) -> std::result::Result<Image, String> {
    load_image(m.resolve(p)).map_err(|e| format!("{what}: {e}"))
}

fn describe(img: &Image, id: &str, cfg: &BenchConfig) -> std::result::Result<KeypointSet, String> {
    detect_and_describe(img, id, &cfg.matcher.detector).map_err(|e| e.to_string())
}

fn verified(
    a: &KeypointSet,
    b: &KeypointSet,
    cfg: &BenchConfig,
) -> std::result::Result<MatchSet, String> {
    match_keypoint_sets(a, b, &cfg.matcher).map_err(|e| e.to_string())
}

fn filter_one(
    m: &Manifest,
    e: &ManifestEntry,
    cfg: &BenchConfig,
) -> std::result::Result<usize, String> {
    let subject = load(m, &e.subject_path, "subject")?;
    let generated = load(m, &e.generated_path, "generated")?;
    let ks = describe(&subject, "subject", cfg)?;
    let kg = describe(&generated, "generated", cfg)?;
    Ok(verified(&ks, &kg, cfg)?.inlier_count())
}

/// Keeps entries whose subject/generated verified match count reaches
/// `cfg.min_matches`. Per-sample failures drop the entry and are logged.
pub fn quality_filter(m: &Manifest, cfg: &BenchConfig) -> (Manifest, FilterLog) {
    let records: Vec<FilterRecord> = with_pool(cfg.workers, || {
        m.entries
            .par_iter()
            .map(|e| match filter_one(m, e, cfg) {
                Ok(n) => FilterRecord {
                    sample_id: e.sample_id.clone(),
                    count: Some(n),
                    kept: n >= cfg.min_matches,
                    reason: None,
                },
                Err(reason) => FilterRecord {
                    sample_id: e.sample_id.clone(),
                    count: None,
                    kept: cfg.min_matches == 0,
                    reason: Some(reason),
                },
            })
            .collect()
    });
    let mut out = m.clone();
    out.entries = m
        .entries
        .iter()
        .zip(&records)
        .filter(|(_, r)| r.kept)
        .map(|(e, _)| e.clone())
        .collect();
    (
        out,
        FilterLog {
            min_matches: cfg.min_matches,
            records,
        },
    )
}

struct Counts {
    n: usize,
    raw: usize,
}

fn eval_one(
    m: &Manifest,
    e: &ManifestEntry,
    cfg: &BenchConfig,
    emb: Option<&EmbeddingIndex>,
) -> std::result::Result<SampleResult, String> {
    let refined_path = e.refined_path.as_ref().ok_or("no refined_path")?;
    let subject = load(m, &e.subject_path, "subject")?;
    let generated = load(m, &e.generated_path, "generated")?;
    let refined = load(m, refined_path, "refined")?;
    if refined.dims() != generated.dims() {
        return Err(format!(
            "dim mismatch: refined {:?} vs generated {:?}",
            refined.dims(),
            generated.dims()
        ));
    }
    let ks = describe(&subject, "subject", cfg)?;
    let kg = describe(&generated, "generated", cfg)?;
    let base = verified(&ks, &kg, cfg)?;
    let (b, r) = if cfg.on_crop {
        // Both images are cut with the region localized in the generated one.
        let region =
            subject_crop(&base, &kg, generated.dims(), &cfg.crop).map_err(|e| e.to_string())?;
        let gc = extract_crop(&generated, &region).map_err(|e| e.to_string())?;
        let rc = extract_crop(&refined, &region).map_err(|e| e.to_string())?;
        let base = verified(&ks, &describe(&gc, "generated", cfg)?, cfg)?;
        let refd = verified(&ks, &describe(&rc, "refined", cfg)?, cfg)?;
        (
            Counts {
                n: base.inlier_count(),
                raw: base.raw_count(),
            },
            Counts {
                n: refd.inlier_count(),
                raw: refd.raw_count(),
            },
        )
    } else {
        let kr = describe(&refined, "refined", cfg)?;
        let refd = verified(&ks, &kr, cfg)?;
        (
            Counts {
                n: base.inlier_count(),
                raw: base.raw_count(),
            },
            Counts {
                n: refd.inlier_count(),
                raw: refd.raw_count(),
            },
        )
    };
    let mut res = SampleResult::new(e.sample_id.clone(), b.n, r.n);
    res.raw_base = Some(b.raw);
    res.raw_refined = Some(r.raw);
    if let Some(idx) = emb {
        res.clip_i = idx.similarity(&e.sample_id, "clip");
        res.dino = idx.similarity(&e.sample_id, "dino");
    }
    Ok(res)
}

/// AKI per entry, then K_Gain per (method, backbone) group and overall.
pub fn run_eval(
    m: &Manifest,
    cfg: &BenchConfig,
    emb: Option<&EmbeddingIndex>,
) -> Result<EvalReport> {
    let outcomes: Vec<std::result::Result<SampleResult, String>> = with_pool(cfg.workers, || {
        m.entries
            .par_iter()
            .map(|e| eval_one(m, e, cfg, emb))
            .collect()
    });
    let mut samples = Vec::new();
    let mut skips = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<SampleResult>> = BTreeMap::new();
    for (e, o) in m.entries.iter().zip(outcomes) {
        match o {
            Ok(r) => {
                groups
                    .entry((e.method_tag.clone(), e.backbone_tag.clone()))
                    .or_default()
                    .push(r.clone());
                samples.push(r);
            }
            Err(reason) => {
                log::warn!("{}: skipped: {reason}", e.sample_id);
                skips.push(Skip {
                    sample_id: e.sample_id.clone(),
                    reason,
                });
            }
        }
    }
    if samples.is_empty() {
        return Err(BenchError::AllSkipped(m.entries.len()));
    }
    samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    skips.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let summarize = |rs: &[SampleResult]| aggregate(rs, cfg.tau).expect("non-empty group");
    let groups = groups
        .into_iter()
        .map(|((method_tag, backbone_tag), mut rs)| {
            rs.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
            GroupSummary {
                method_tag,
                backbone_tag,
                summary: summarize(&rs),
            }
        })
        .collect();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        config: cfg.clone(),
        rng_seed: cfg.matcher.ransac.seed,
        tau: cfg.tau,
        overall: summarize(&samples),
        samples,
        skips,
        groups,
        generated_at: None,
    })
}
