//! Subject-region crops for external embedders, and the seeded fixed-subset
//! sampler.

use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cropblend::{extract_crop, subject_crop, CropRegion};
use crate::imgcore::{load_image, save_image};
use crate::keypoints::detect_and_describe;
use crate::matching::match_keypoint_sets;
use crate::metrics::SampleResult;

use super::eval::Skip;
use super::{with_pool, BenchConfig, BenchError, Manifest, ManifestEntry, Result};

pub const CROP_MANIFEST_SCHEMA: &str = "fidelkit-crops-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropManifestEntry {
    pub sample_id: String,
    pub region: CropRegion,
    pub subject_path: String,
    pub generated_crop_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_crop_path: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropManifest {
    pub schema_version: String,
    pub entries: Vec<CropManifestEntry>,
    pub skips: Vec<Skip>,
}

fn crop_one(
    m: &Manifest,
    e: &ManifestEntry,
    cfg: &BenchConfig,
    out_dir: &Path,
) -> std::result::Result<CropManifestEntry, String> {
    let subject =
        load_image(m.resolve(&e.subject_path)).map_err(|err| format!("subject: {err}"))?;
    let generated =
        load_image(m.resolve(&e.generated_path)).map_err(|err| format!("generated: {err}"))?;
    let det = &cfg.matcher.detector;
    let ks = detect_and_describe(&subject, "subject", det).map_err(|err| err.to_string())?;
    let kg = detect_and_describe(&generated, "generated", det).map_err(|err| err.to_string())?;
    let ms = match_keypoint_sets(&ks, &kg, &cfg.matcher).map_err(|err| err.to_string())?;
    let region =
        subject_crop(&ms, &kg, generated.dims(), &cfg.crop).map_err(|err| err.to_string())?;

    let gen_path = out_dir.join(format!("{}.generated.png", e.sample_id));
    let gc = extract_crop(&generated, &region).map_err(|err| err.to_string())?;
    save_image(&gc, &gen_path).map_err(|err| err.to_string())?;
    let refined_crop_path = match &e.refined_path {
        Some(p) => {
            let refined = load_image(m.resolve(p)).map_err(|err| format!("refined: {err}"))?;
            let rc = extract_crop(&refined, &region).map_err(|err| format!("refined: {err}"))?;
            let path = out_dir.join(format!("{}.refined.png", e.sample_id));
            save_image(&rc, &path).map_err(|err| err.to_string())?;
            Some(path.display().to_string())
        }
        None => None,
    };
    Ok(CropManifestEntry {
        sample_id: e.sample_id.clone(),
        region,
        subject_path: m.resolve(&e.subject_path).display().to_string(),
        generated_crop_path: gen_path.display().to_string(),
        refined_crop_path,
    })
}

/// Writes `{sample_id}.generated.png` (and `.refined.png`) crops around the
/// localized subject. The crop rectangle comes from the generated image and
/// is reused for the refined one.
pub fn export_subject_crops(
    m: &Manifest,
    cfg: &BenchConfig,
    out_dir: &Path,
) -> Result<CropManifest> {
    std::fs::create_dir_all(out_dir).map_err(|err| BenchError::io(out_dir, err))?;
    let outcomes: Vec<_> = with_pool(cfg.workers, || {
        m.entries
            .par_iter()
            .map(|e| crop_one(m, e, cfg, out_dir))
            .collect()
    });
    let mut entries = Vec::new();
    let mut skips = Vec::new();
    for (e, o) in m.entries.iter().zip(outcomes) {
        match o {
            Ok(c) => entries.push(c),
            Err(reason) => skips.push(Skip {
                sample_id: e.sample_id.clone(),
                reason,
            }),
        }
    }
    Ok(CropManifest {
        schema_version: CROP_MANIFEST_SCHEMA.to_string(),
        entries,
        skips,
    })
}

/// Picks `n` sample ids so the n_base distribution is kept: results are
/// ranked by n_base, cut into deciles, and each decile contributes in
/// proportion to its size (largest remainder). Returned ids are sorted.
pub fn stratified_subset(results: &[SampleResult], n: usize, seed: u64) -> Vec<String> {
    let mut ranked: Vec<&SampleResult> = results.iter().collect();
    ranked.sort_by(|a, b| a.n_base.cmp(&b.n_base).then(a.sample_id.cmp(&b.sample_id)));
    let total = ranked.len();
    if n >= total {
        let mut all: Vec<String> = ranked.iter().map(|r| r.sample_id.clone()).collect();
        all.sort();
        return all;
    }
    let bounds: Vec<usize> = (0..=10).map(|k| total * k / 10).collect();
    let sizes: Vec<usize> = bounds.windows(2).map(|w| w[1] - w[0]).collect();
    let mut quota: Vec<usize> = sizes.iter().map(|s| s * n / total).collect();
    let mut order: Vec<usize> = (0..10).collect();
    // Remainders compared exactly as s*n mod total; ties go to lower deciles.
    order.sort_by(|&a, &b| {
        ((sizes[b] * n) % total)
            .cmp(&((sizes[a] * n) % total))
            .then(a.cmp(&b))
    });
    let mut left = n - quota.iter().sum::<usize>();
    for &d in &order {
        if left == 0 {
            break;
        }
        if quota[d] < sizes[d] {
            quota[d] += 1;
            left -= 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for d in 0..10 {
        let slice = &ranked[bounds[d]..bounds[d + 1]];
        for i in sample(&mut rng, slice.len(), quota[d]).into_iter() {
            out.push(slice[i].sample_id.clone());
        }
    }
    out.sort();
    out
}
