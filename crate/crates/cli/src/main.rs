use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use fidelkit::bench::{
    emit_scatter, export_subject_crops, load_manifest, quality_filter, run_eval, run_refine,
    save_manifest, BenchConfig, BenchError, EmbeddingIndex, EvalReport, ExternalRefiner,
    IdentityRefiner, Manifest, Refiner, ScatterFormat, WarpRefiner,
};
use fidelkit::degrade::{
    degrade, synthesize_pairs, uniform_noise, validate_degradation, write_records, AugmentSpec,
    DegradeMethod, DegradeSpec, PairJob,
};
use fidelkit::imgcore::load_image;
use fidelkit::keypoints::detect_and_describe;
use fidelkit::matching::{
    export_matches, load_external_matches, match_count, save_external_matches, ModelKind,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_ALL_SKIPPED: u8 = 3;

/// A missing or inconsistent argument detected after parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: &str) -> anyhow::Error {
    Usage(msg.to_string()).into()
}

#[derive(Parser)]
#[command(
    name = "fidelkit",
    version,
    about = "Keypoint-based subject fidelity toolkit"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Dataset manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Configuration file (JSON) with optional `bench`, `degrade` and `augment` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for RANSAC and synthesis.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Improvement threshold for K_Gain.
    #[arg(long, global = true, allow_hyphen_values = true)]
    tau: Option<i64>,
    /// Worker threads (0 = one per processor).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect and describe keypoints in one image.
    Detect {
        #[arg(long)]
        image: PathBuf,
    },
    /// Count verified matches between two images, or import external matches.
    Match {
        #[arg(long = "ref", required_unless_present = "import")]
        reference: Option<PathBuf>,
        #[arg(long, required_unless_present = "import")]
        other: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// Externally produced match file to count instead of matching.
        #[arg(long, conflicts_with_all = ["reference", "other"])]
        import: Option<PathBuf>,
        /// Re-verify imported pairs with RANSAC.
        #[arg(long, requires = "import")]
        reverify: bool,
    },
    /// Compute AKI and K_Gain over a manifest with refined images.
    Eval {
        /// Directory of `{sample_id}.{subject|refined}.{clip|dino}.{json|bin}` embeddings.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Count matches on the subject crop only.
        #[arg(long)]
        on_crop: bool,
    },
    /// Crop, refine and blend back every manifest entry.
    Refine {
        /// External refiner command with {subject} {crop} {out} placeholders.
        #[arg(long, conflicts_with = "builtin")]
        refiner_cmd: Option<String>,
        /// Built-in refiner used when no command is given.
        #[arg(long, value_enum, default_value = "identity")]
        builtin: BuiltinRefiner,
        #[arg(long, default_value_t = 300)]
        timeout_secs: u64,
    },
    /// Synthesize pseudo pairs from clean images.
    PseudoPair {
        /// Image file or directory of images.
        #[arg(long)]
        input: PathBuf,
        /// Pairs per input image.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        strength: Option<f64>,
        /// External degrader command with {in} {out} placeholders.
        #[arg(long)]
        degrader_cmd: Option<String>,
        #[arg(long)]
        swap: bool,
    },
    /// Check that degradation variance concentrates on high-gradient pixels.
    ValidateDegrade {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 10)]
        variants: usize,
        #[arg(long)]
        strength: Option<f64>,
        /// Also report a uniform-noise control with this sigma.
        #[arg(long)]
        control_sigma: Option<f64>,
    },
    /// Keep entries whose subject is clearly present.
    Filter {
        #[arg(long)]
        min_matches: Option<usize>,
    },
    /// Export subject-region crops for external embedders.
    Crops,
    /// Write the (n_base, n_refined) scatter of a report as CSV or SVG.
    Scatter {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Affine,
    Homography,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuiltinRefiner {
    Identity,
    /// Warps the subject through the verified model (a synthetic-data oracle).
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ToolConfig {
    bench: BenchConfig,
    degrade: DegradeSpec,
    augment: AugmentSpec,
}

impl Common {
    fn config(&self) -> Result<ToolConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => ToolConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.bench.matcher.ransac.seed = s;
            cfg.degrade.seed = s;
            cfg.augment.seed = s;
        }
        if let Some(t) = self.tau {
            cfg.bench.tau = t;
        }
        if let Some(w) = self.workers {
            cfg.bench.workers = w;
        }
        Ok(cfg)
    }

    fn manifest(&self) -> Result<Manifest> {
        let p = self
            .manifest
            .as_ref()
            .ok_or_else(|| usage("--manifest is required"))?;
        Ok(load_manifest(p)?)
    }

    fn out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| usage("--out is required"))
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Paths made absolute so the manifest can be saved anywhere.
fn detached(m: &Manifest) -> Manifest {
    let abs = |p: &str| {
        let r = m.resolve(p);
        std::path::absolute(&r).unwrap_or(r).display().to_string()
    };
    let mut out = m.clone();
    for e in &mut out.entries {
        e.subject_path = abs(&e.subject_path);
        e.generated_path = abs(&e.generated_path);
        e.refined_path = e.refined_path.as_deref().map(abs);
    }
    out.base_dir = None;
    out
}

fn timestamp() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}

fn image_files(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(input)
        .with_context(|| format!("reading {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no images in {}", input.display());
    }
    Ok(files)
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let mut cfg = c.config()?;
    match cli.command {
        Command::Detect { image } => {
            let img = load_image(&image)?;
            let id = image
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("image");
            let kps = detect_and_describe(&img, id, &cfg.bench.matcher.detector)?;
            match &c.out {
                Some(p) => write_json(p, &kps.to_json())?,
                None => println!("{} keypoints", kps.len()),
            }
        }
        Command::Match {
            reference,
            other,
            kind,
            import,
            reverify,
        } => {
            if let Some(k) = kind {
                cfg.bench.matcher.ransac.kind = match k {
                    Kind::Affine => ModelKind::Affine,
                    Kind::Homography => ModelKind::Homography,
                };
            }
            if let Some(path) = import {
                let ransac = reverify.then_some(&cfg.bench.matcher.ransac);
                let imported = load_external_matches(&path, ransac)?;
                print_json(&serde_json::json!({
                    "count": imported.matchset.inlier_count(),
                    "raw_count": imported.matchset.raw_count(),
                }))?;
                return Ok(());
            }
            let (a, b) = (reference.expect("required"), other.expect("required"));
            let r = match_count(&load_image(&a)?, &load_image(&b)?, &cfg.bench.matcher)?;
            if let Some(p) = &c.out {
                let file = export_matches(&r.matchset, &r.kps_ref, &r.kps_other);
                save_external_matches(p, &file)?;
            }
            print_json(&serde_json::json!({ "count": r.count, "raw_count": r.raw_count }))?;
        }
        Command::Eval {
            embeddings,
            on_crop,
        } => {
            let m = c.manifest()?;
            cfg.bench.on_crop |= on_crop;
            let idx = embeddings
                .as_deref()
                .map(EmbeddingIndex::load_dir)
                .transpose()?;
            let mut report: EvalReport = run_eval(&m, &cfg.bench, idx.as_ref())?;
            report.generated_at = Some(timestamp());
            match &c.out {
                Some(p) => write_json(p, &report)?,
                None => print_json(&report)?,
            }
            eprintln!(
                "{} samples, {} skipped, mean AKI {:.2}, K_Gain {}",
                report.samples.len(),
                report.skips.len(),
                report.overall.mean_aki,
                report.overall.k_gain_percent
            );
        }
        Command::Refine {
            refiner_cmd,
            builtin,
            timeout_secs,
        } => {
            let m = c.manifest()?;
            let out = c.out()?;
            let external;
            let refiner: &dyn Refiner = match (&refiner_cmd, builtin) {
                (Some(cmd), _) => {
                    external = ExternalRefiner::new(cmd, Duration::from_secs(timeout_secs))?;
                    &external
                }
                (None, BuiltinRefiner::Identity) => &IdentityRefiner,
                (None, BuiltinRefiner::Oracle) => &WarpRefiner,
            };
            let outcome = run_refine(&m, refiner, &cfg.bench, out)?;
            save_manifest(&out.join("manifest.json"), &outcome.manifest)?;
            write_json(
                &out.join("refine_log.json"),
                &serde_json::json!({ "records": outcome.records, "skips": outcome.skips }),
            )?;
            eprintln!(
                "{} refined, {} skipped",
                outcome.records.len(),
                outcome.skips.len()
            );
            if outcome.records.is_empty() && !m.entries.is_empty() {
                return Err(BenchError::AllSkipped(m.entries.len()).into());
            }
        }
        Command::PseudoPair {
            input,
            count,
            level,
            strength,
            degrader_cmd,
            swap,
        } => {
            let out = c.out()?;
            std::fs::create_dir_all(out)?;
            if level.is_some() {
                cfg.degrade.level = level;
            }
            if let Some(s) = strength {
                cfg.degrade.strength = s;
            }
            if let Some(cmd) = degrader_cmd {
                cfg.degrade.method = DegradeMethod::External;
                cfg.degrade.external_cmd = Some(cmd);
            }
            cfg.degrade.validate()?;
            cfg.augment.validate()?;
            let mut jobs = Vec::new();
            for (i, path) in image_files(&input)?.into_iter().enumerate() {
                for k in 0..count {
                    let seed = cfg.degrade.seed.wrapping_add((i * count + k) as u64);
                    jobs.push(PairJob {
                        id: format!("p{:06}", i * count + k),
                        clean_path: path.clone(),
                        degrade: DegradeSpec {
                            seed,
                            ..cfg.degrade.clone()
                        },
                        augment: AugmentSpec {
                            seed: cfg.augment.seed.wrapping_add((i * count + k) as u64),
                            ..cfg.augment.clone()
                        },
                        swap,
                    });
                }
            }
            let results = synthesize_pairs(&jobs, out, cfg.bench.workers);
            let mut records = Vec::new();
            for (job, r) in jobs.iter().zip(results) {
                match r {
                    Ok(rec) => records.push(rec),
                    Err(e) => eprintln!("{}: skipped: {e}", job.id),
                }
            }
            write_records(&out.join("pairs.jsonl"), &records)?;
            eprintln!("{} of {} pairs written", records.len(), jobs.len());
            if records.is_empty() {
                return Err(BenchError::AllSkipped(jobs.len()).into());
            }
        }
        Command::ValidateDegrade {
            image,
            variants,
            strength,
            control_sigma,
        } => {
            let img = load_image(&image)?;
            if let Some(s) = strength {
                cfg.degrade.strength = s;
            }
            // Variants differ only in their noise seed; the level stays fixed.
            let level = cfg.degrade.resolve_level();
            let imgs = (0..variants as u64)
                .map(|k| {
                    let spec = DegradeSpec {
                        level: Some(level),
                        seed: cfg.degrade.seed.wrapping_add(k),
                        ..cfg.degrade.clone()
                    };
                    degrade(&img, &spec)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let report = validate_degradation(&img, &imgs)?;
            let control = control_sigma
                .map(|s| {
                    let ctl: Vec<_> = (0..variants as u64)
                        .map(|k| uniform_noise(&img, s, cfg.degrade.seed.wrapping_add(k)))
                        .collect();
                    validate_degradation(&img, &ctl)
                })
                .transpose()?;
            let doc = serde_json::json!({
                "schema_version": "fidelkit-degrade-validation-v1",
                "variants": variants,
                "degrade": DegradeSpec { level: Some(level), ..cfg.degrade.clone() },
                "report": report,
                "control": control,
            });
            match &c.out {
                Some(p) => write_json(p, &doc)?,
                None => print_json(&doc)?,
            }
        }
        Command::Filter { min_matches } => {
            let m = c.manifest()?;
            let out = c.out()?;
            if let Some(n) = min_matches {
                cfg.bench.min_matches = n;
            }
            let (kept, log) = quality_filter(&m, &cfg.bench);
            save_manifest(out, &detached(&kept))?;
            write_json(&out.with_extension("log.json"), &log)?;
            eprintln!("kept {} of {} entries", kept.entries.len(), m.entries.len());
        }
        Command::Crops => {
            let m = c.manifest()?;
            let out = c.out()?;
            let crops = export_subject_crops(&m, &cfg.bench, out)?;
            write_json(&out.join("crops.json"), &crops)?;
            eprintln!(
                "{} cropped, {} skipped",
                crops.entries.len(),
                crops.skips.len()
            );
        }
        Command::Scatter { report, format } => {
            let out = c.out()?;
            let text = std::fs::read_to_string(&report)
                .with_context(|| format!("reading {}", report.display()))?;
            let rep: EvalReport = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", report.display()))?;
            let format = match format {
                Some(Format::Csv) => ScatterFormat::Csv,
                Some(Format::Svg) => ScatterFormat::Svg,
                None => ScatterFormat::from_path(out)
                    .ok_or_else(|| usage("cannot infer format from --out; pass --format"))?,
            };
            emit_scatter(&rep, out, format)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let all_skipped = e
                .downcast_ref::<BenchError>()
                .is_some_and(|b| matches!(b, BenchError::AllSkipped(_)));
            ExitCode::from(if all_skipped {
                EXIT_ALL_SKIPPED
            } else if e.downcast_ref::<Usage>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            })
        }
    }
}
