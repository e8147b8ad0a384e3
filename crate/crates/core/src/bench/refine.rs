//! Crop, refine and blend back: the only pixels a refiner can change are
//! those inside the subject crop.

use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cropblend::{extract_crop, poisson_blend_with, subject_crop, CropRegion, SolverConfig};
use crate::imgcore::{load_image, save_image, warp_into, Image};
use crate::keypoints::detect_and_describe;
use crate::matching::{match_keypoint_sets, MatchSet};
use crate::process::{run_command, CommandTemplate, ProcessError};

use super::eval::Skip;
use super::{with_pool, BenchConfig, BenchError, Manifest, ManifestEntry, Result};

/// Everything a refiner may look at for one sample. The matchset maps
/// subject keypoints (`idx_a`) to generated-image keypoints (`idx_b`).
pub struct RefineJob<'a> {
    pub sample_id: &'a str,
    pub subject: &'a Image,
    pub crop: &'a Image,
    pub region: &'a CropRegion,
    pub matchset: &'a MatchSet,
    pub subject_path: &'a Path,
    pub crop_path: &'a Path,
    pub out_path: &'a Path,
}

pub trait Refiner: Sync {
    /// Returns the refined crop; its dims must equal the crop's.
    fn refine(&self, job: &RefineJob) -> std::result::Result<Image, String>;
}

/// Runs an external command with `{subject}`, `{crop}` and `{out}`
/// placeholders and loads the image it writes to `{out}`.
#[derive(Clone, Debug)]
pub struct ExternalRefiner {
    template: CommandTemplate,
    timeout: Duration,
}

impl ExternalRefiner {
    pub fn new(template: &str, timeout: Duration) -> std::result::Result<Self, ProcessError> {
        Ok(Self {
            template: CommandTemplate::parse(template, &["subject", "crop", "out"])?,
            timeout,
        })
    }
}

impl Refiner for ExternalRefiner {
    fn refine(&self, job: &RefineJob) -> std::result::Result<Image, String> {
        let argv = self.template.render(&[
            ("subject", job.subject_path.display().to_string()),
            ("crop", job.crop_path.display().to_string()),
            ("out", job.out_path.display().to_string()),
        ]);
        run_command(&argv, self.timeout).map_err(|e| format!("refiner failed: {e}"))?;
        load_image(job.out_path).map_err(|e| format!("refiner output: {e}"))
    }
}

/// Returns the crop unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityRefiner;

impl Refiner for IdentityRefiner {
    fn refine(&self, job: &RefineJob) -> std::result::Result<Image, String> {
        Ok(job.crop.clone())
    }
}

/// Re-renders the subject into the crop through the verified model; crop
/// pixels the subject does not cover are kept.
#[derive(Clone, Copy, Debug, Default)]
pub struct WarpRefiner;

impl Refiner for WarpRefiner {
    fn refine(&self, job: &RefineJob) -> std::result::Result<Image, String> {
        let model = job.matchset.model.as_ref().ok_or("no verified model")?;
        let inv = model.inverse().ok_or("model not invertible")?;
        let (x0, y0) = (job.region.x0 as f64, job.region.y0 as f64);
        let mut out = job.crop.clone();
        warp_into(&mut out, job.subject, |x, y| {
            inv.apply([x + x0, y + y0]).map(|p| (p[0], p[1]))
        });
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineRecord {
    pub sample_id: String,
    pub region: CropRegion,
    pub inliers: usize,
    pub blend_iterations: Vec<usize>,
    pub refined_path: String,
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    /// Input entries with absolute paths; `refined_path` is set for every
    /// sample that was not skipped.
    pub manifest: Manifest,
    pub records: Vec<RefineRecord>,
    pub skips: Vec<Skip>,
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn refine_one(
    m: &Manifest,
    e: &ManifestEntry,
    refiner: &dyn Refiner,
    cfg: &BenchConfig,
    out_dir: &Path,
) -> std::result::Result<RefineRecord, String> {
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
    let crop = extract_crop(&generated, &region).map_err(|err| err.to_string())?;

    let work = out_dir.join("work").join(&e.sample_id);
    std::fs::create_dir_all(&work).map_err(|err| format!("{}: {err}", work.display()))?;
    let (subject_path, crop_path, out_path) = (
        work.join("subject.png"),
        work.join("crop.png"),
        work.join("refined_crop.png"),
    );
    save_image(&subject, &subject_path).map_err(|err| err.to_string())?;
    save_image(&crop, &crop_path).map_err(|err| err.to_string())?;

    let job = RefineJob {
        sample_id: &e.sample_id,
        subject: &subject,
        crop: &crop,
        region: &region,
        matchset: &ms,
        subject_path: &subject_path,
        crop_path: &crop_path,
        out_path: &out_path,
    };
    let patch = refiner.refine(&job)?;
    if patch.dims() != crop.dims() {
        return Err(format!(
            "dim mismatch: refined crop {:?}, expected {:?}",
            patch.dims(),
            crop.dims()
        ));
    }
    // Quantize like a refiner that round-trips through PNG would.
    let patch = patch.clamped().quantized();
    let blended = poisson_blend_with(
        &generated,
        &patch,
        &region,
        cfg.blend_mode,
        &SolverConfig::default(),
    )
    .map_err(|err| err.to_string())?;
    let refined_path = absolute(&out_dir.join(format!("{}_refined.png", e.sample_id)));
    save_image(&blended.image, &refined_path).map_err(|err| err.to_string())?;
    Ok(RefineRecord {
        sample_id: e.sample_id.clone(),
        inliers: ms.inlier_count(),
        region,
        blend_iterations: blended.iterations,
        refined_path: refined_path.display().to_string(),
    })
}

/// For each entry: match, crop, refine, blend back and write
/// `{out_dir}/{sample_id}_refined.png`. Per-sample failures become skips.
pub fn run_refine(
    m: &Manifest,
    refiner: &dyn Refiner,
    cfg: &BenchConfig,
    out_dir: &Path,
) -> Result<RefineOutcome> {
    std::fs::create_dir_all(out_dir).map_err(|err| BenchError::io(out_dir, err))?;
    let outcomes: Vec<std::result::Result<RefineRecord, String>> = with_pool(cfg.workers, || {
        m.entries
            .par_iter()
            .map(|e| refine_one(m, e, refiner, cfg, out_dir))
            .collect()
    });
    let mut manifest = Manifest::new(Vec::with_capacity(m.entries.len()));
    let mut records = Vec::new();
    let mut skips = Vec::new();
    for (e, o) in m.entries.iter().zip(outcomes) {
        let mut entry = e.clone();
        entry.subject_path = absolute(&m.resolve(&e.subject_path)).display().to_string();
        entry.generated_path = absolute(&m.resolve(&e.generated_path))
            .display()
            .to_string();
        entry.refined_path = None;
        match o {
            Ok(rec) => {
                entry.refined_path = Some(rec.refined_path.clone());
                records.push(rec);
            }
            Err(reason) => {
                log::warn!("{}: skipped: {reason}", e.sample_id);
                skips.push(Skip {
                    sample_id: e.sample_id.clone(),
                    reason,
                });
            }
        }
        manifest.entries.push(entry);
    }
    Ok(RefineOutcome {
        manifest,
        records,
        skips,
    })
}
