//! Pseudo-paired training data: degrade a clean image at one of three
//! working resolutions, augment a reference view, and check that the
//! degradation lands on fine detail.

mod augment;
mod builtin;
mod validate;

pub use augment::{augment_reference, AugmentParams, AugmentSpec};
pub use builtin::{degrade_builtin, detail_weight, uniform_noise, LOW_BAND_SIGMA, NOISE_GAIN};
pub use validate::{
    pearson, validate_degradation, variance_map, ValidationReport, DEFAULT_VARIANTS,
    DEGENERATE_VARIANCE,
};

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{load_image, resize, save_image, to_grayscale, Image, ImageError};
use crate::process::{run_command, CommandTemplate, ProcessError};

#[derive(Debug, Error)]
pub enum DegradeError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("need at least 2 variants, got {0}")]
    TooFewVariants(usize),
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, DegradeError>;

/// Working-resolution factors a degradation level is drawn from.
pub const LEVELS: [f64; 3] = [1.0, 0.5, 0.25];

pub const DEFAULT_TIMEOUT_SECS: u64 = 300;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegradeMethod {
    #[default]
    Builtin,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradeSpec {
    /// One of [`LEVELS`]; drawn uniformly from the seed when unset.
    pub level: Option<f64>,
    pub method: DegradeMethod,
    /// Builtin only.
    pub strength: f64,
    pub seed: u64,
    /// External only: `cmd {in} {out} [{seed}] [{level}]`.
    pub external_cmd: Option<String>,
    pub timeout_secs: u64,
}

impl Default for DegradeSpec {
    fn default() -> Self {
        Self {
            level: None,
            method: DegradeMethod::Builtin,
            strength: 0.5,
            seed: 0,
            external_cmd: None,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
        }
    }
}

/// Stream tag so the level draw does not share a sequence with the noise.
const LEVEL_STREAM: u64 = 0x4C45_5645_4C00_0001;

impl DegradeSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.level {
            if !LEVELS.contains(&l) {
                return Err(DegradeError::InvalidSpec(format!(
                    "level {l} not in {LEVELS:?}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(DegradeError::InvalidSpec(format!(
                "strength {} not in [0, 1]",
                self.strength
            )));
        }
        if self.method == DegradeMethod::External {
            let cmd = self.external_cmd.as_deref().ok_or_else(|| {
                DegradeError::InvalidSpec("external method needs external_cmd".into())
            })?;
            CommandTemplate::parse(cmd, &["in", "out"])?;
        }
        Ok(())
    }

    /// The fixed level, or a uniform draw over [`LEVELS`] from the seed.
    pub fn resolve_level(&self) -> f64 {
        self.level.unwrap_or_else(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ LEVEL_STREAM);
            LEVELS[rng.gen_range(0..LEVELS.len())]
        })
    }
}

fn scaled(side: usize, level: f64) -> usize {
    ((side as f64 * level).round() as usize).max(1)
}

/// Resize to `level` and back; the identity at level 1.
pub fn level_round_trip(img: &Image, level: f64) -> Result<Image> {
    if level == 1.0 {
        return Ok(img.clone());
    }
    let (w, h) = img.dims();
    let down = resize(img, scaled(w, level), scaled(h, level))?;
    Ok(resize(&down, w, h)?)
}

/// Runs an external degrader on the level round-trip of `img`.
pub fn degrade_external(
    img: &Image,
    cmd: &str,
    level: f64,
    seed: u64,
    timeout: Duration,
) -> Result<Image> {
    let template = CommandTemplate::parse(cmd, &["in", "out"])?;
    let dir = tempfile::tempdir().map_err(|e| DegradeError::Io {
        path: std::env::temp_dir().display().to_string(),
        reason: e.to_string(),
    })?;
    let input = dir.path().join("in.png");
    let output = dir.path().join("out.png");
    save_image(&level_round_trip(img, level)?, &input)?;
    let argv = template.render(&[
        ("in", input.display().to_string()),
        ("out", output.display().to_string()),
        ("seed", seed.to_string()),
        ("level", level.to_string()),
    ]);
    run_command(&argv, timeout)?;
    if !output.exists() {
        return Err(DegradeError::Io {
            path: output.display().to_string(),
            reason: "degrader produced no output".into(),
        });
    }
    let out = load_image(&output)?;
    if out.dims() != img.dims() {
        return Err(DegradeError::DimMismatch {
            expected: img.dims(),
            got: out.dims(),
        });
    }
    Ok(match (img.channels(), out.channels()) {
        (a, b) if a == b => out,
        (1, _) => to_grayscale(&out),
        _ => Image::from_channels(&[out.clone(), out.clone(), out])?,
    })
}

/// Degrades `img` at the spec's level. The builtin degrader runs at the
/// reduced resolution between the down- and up-resize.
pub fn degrade(img: &Image, spec: &DegradeSpec) -> Result<Image> {
    spec.validate()?;
    let level = spec.resolve_level();
    match spec.method {
        DegradeMethod::Builtin => {
            if level == 1.0 {
                return degrade_builtin(img, spec.strength, spec.seed);
            }
            let (w, h) = img.dims();
            let down = resize(img, scaled(w, level), scaled(h, level))?;
            let d = degrade_builtin(&down, spec.strength, spec.seed)?;
            Ok(resize(&d, w, h)?)
        }
        DegradeMethod::External => degrade_external(
            img,
            spec.external_cmd.as_deref().unwrap_or_default(),
            level,
            spec.seed,
            Duration::from_secs(spec.timeout_secs),
        ),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoPair {
    /// Training target.
    pub clean: Image,
    pub degraded: Image,
    pub reference: Image,
    pub level: f64,
    pub augment: AugmentParams,
    pub role_swapped: bool,
}

/// Builds one pseudo pair. Without `swap` the clean image is degraded and an
/// augmented view serves as reference; with `swap` the augmented view is
/// degraded (and is the target) while the untouched clean image is the
/// reference.
pub fn make_pseudo_pair(
    clean: &Image,
    dspec: &DegradeSpec,
    aspec: &AugmentSpec,
    swap: bool,
) -> Result<PseudoPair> {
    dspec.validate()?;
    let level = dspec.resolve_level();
    let resolved = DegradeSpec {
        level: Some(level),
        ..dspec.clone()
    };
    let (augmented, params) = augment_reference(clean, aspec)?;
    let (target, reference) = if swap {
        (augmented, clean.clone())
    } else {
        (clean.clone(), augmented)
    };
    let degraded = degrade(&target, &resolved)?;
    Ok(PseudoPair {
        clean: target,
        degraded,
        reference,
        level,
        augment: params,
        role_swapped: swap,
    })
}

/// One line of a pair manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub clean_path: String,
    pub degraded_path: String,
    pub reference_path: String,
    /// Spec with the level resolved.
    pub degrade: DegradeSpec,
    pub augment: AugmentSpec,
    pub augment_params: AugmentParams,
    pub role_swapped: bool,
}

/// Writes the three PNGs of a pair into `out_dir` as `{id}_clean.png`,
/// `{id}_degraded.png` and `{id}_reference.png`.
pub fn write_pair(
    pair: &PseudoPair,
    id: &str,
    out_dir: &Path,
    dspec: &DegradeSpec,
    aspec: &AugmentSpec,
) -> Result<PairRecord> {
    let path = |kind: &str| out_dir.join(format!("{id}_{kind}.png"));
    let (c, d, r) = (path("clean"), path("degraded"), path("reference"));
    save_image(&pair.clean, &c)?;
    save_image(&pair.degraded, &d)?;
    save_image(&pair.reference, &r)?;
    Ok(PairRecord {
        id: id.to_string(),
        clean_path: c.display().to_string(),
        degraded_path: d.display().to_string(),
        reference_path: r.display().to_string(),
        degrade: DegradeSpec {
            level: Some(pair.level),
            ..dspec.clone()
        },
        augment: aspec.clone(),
        augment_params: pair.augment.clone(),
        role_swapped: pair.role_swapped,
    })
}

fn io_err(path: &Path, e: impl ToString) -> DegradeError {
    DegradeError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

pub fn write_records(path: &Path, records: &[PairRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| io_err(path, e))?);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| io_err(path, e))?;
        writeln!(f, "{line}").map_err(|e| io_err(path, e))?;
    }
    f.flush().map_err(|e| io_err(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<PairRecord>> {
    let f = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| io_err(path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

/// One unit of batch synthesis.
#[derive(Clone, Debug)]
pub struct PairJob {
    pub id: String,
    pub clean_path: PathBuf,
    pub degrade: DegradeSpec,
    pub augment: AugmentSpec,
    pub swap: bool,
}

/// Synthesizes and writes all jobs on a pool of `workers` threads. Results
/// keep job order.
pub fn synthesize_pairs(
    jobs: &[PairJob],
    out_dir: &Path,
    workers: usize,
) -> Vec<Result<PairRecord>> {
    let run = |job: &PairJob| -> Result<PairRecord> {
        let clean = load_image(&job.clean_path)?;
        let pair = make_pseudo_pair(&clean, &job.degrade, &job.augment, job.swap)?;
        write_pair(&pair, &job.id, out_dir, &job.degrade, &job.augment)
    };
    match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| jobs.par_iter().map(run).collect()),
        Err(_) => jobs.iter().map(run).collect(),
    }
}
