use std::path::Path;

use fidelkit::bench::{
    emit_scatter, export_subject_crops, quality_filter, read_scatter_csv, run_eval, run_refine,
    synthetic_corpus, BenchConfig, CorpusOptions, EvalReport, IdentityRefiner, Manifest,
    ManifestEntry, RefineJob, Refiner, ScatterFormat, WarpRefiner,
};
use fidelkit::cropblend::CropRegion;
use fidelkit::imgcore::{load_image, save_image, Image};
use fidelkit::metrics::{aggregate, SampleResult};
use fidelkit::synth::{apply_homography, plant, planting_homography, scene_image, texture_image};

fn corpus(dir: &Path, samples: usize, fraction: f64, seed: u64) -> Manifest {
    let opts = CorpusOptions {
        samples,
        planted_fraction: fraction,
        seed,
        ..Default::default()
    };
    synthetic_corpus(dir, &opts).unwrap()
}

fn with_refined(m: &Manifest, f: impl Fn(&ManifestEntry) -> String) -> Manifest {
    let mut out = m.clone();
    for e in &mut out.entries {
        e.refined_path = Some(f(e));
    }
    out
}

#[test]
fn filter_keeps_exactly_the_planted_half() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 8, 0.5, 11);
    let opts = CorpusOptions {
        planted_fraction: 0.5,
        ..Default::default()
    };
    // Unplanted scenes measure 0 matches, planted ones 6 to 25.
    let cfg = BenchConfig {
        min_matches: 4,
        ..Default::default()
    };
    let (kept, log) = quality_filter(&m, &cfg);
    let expect: Vec<String> = (0..8)
        .filter(|&i| opts.is_planted(i))
        .map(|i| format!("s{i:04}"))
        .collect();
    let got: Vec<String> = kept.entries.iter().map(|e| e.sample_id.clone()).collect();
    assert_eq!(got, expect, "{log:?}");
    assert_eq!(log.records.len(), 8);

    let (all, _) = quality_filter(
        &m,
        &BenchConfig {
            min_matches: 0,
            ..Default::default()
        },
    );
    assert_eq!(all, m);
}

#[test]
fn filter_removes_constant_generated_and_logs_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = corpus(dir.path(), 2, 1.0, 3);
    save_image(
        &Image::filled(320, 320, 3, 0.5).unwrap(),
        dir.path().join("flat.png"),
    )
    .unwrap();
    m.entries[0].generated_path = "flat.png".into();
    m.entries[1].generated_path = "missing.png".into();
    let (kept, log) = quality_filter(
        &m,
        &BenchConfig {
            min_matches: 1,
            ..Default::default()
        },
    );
    assert!(kept.entries.is_empty());
    assert_eq!(log.records[0].count, Some(0));
    assert!(log.records[1].reason.is_some());
}

#[test]
fn self_comparison_gives_zero_gain() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 3, 1.0, 5);
    let m = with_refined(&m, |e| e.generated_path.clone());
    let rep = run_eval(&m, &BenchConfig::default(), None).unwrap();
    assert_eq!(rep.samples.len(), 3);
    assert!(rep.samples.iter().all(|s| s.aki == 0 && s.n_base > 0));
    assert_eq!(rep.overall.k_gain, 0.0);
    assert_eq!(rep.groups.len(), 1);
}

#[test]
fn pasted_reference_improves_every_entry() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 2, 1.0, 21);
    // Refined images are the generated scenes with the clean subject pasted
    // back through the true planting transform.
    let mut m2 = m.clone();
    for (i, e) in m2.entries.iter_mut().enumerate() {
        let s = fidelkit::synth::planted_sample(160, 320, 21 + i as u64 * 7919);
        let generated = load_image(m.resolve(&e.generated_path)).unwrap();
        let (clean, _) = plant(&generated, &s.subject, &s.homography);
        let p = format!("{}_pasted.png", e.sample_id);
        save_image(&clean, dir.path().join(&p)).unwrap();
        e.refined_path = Some(p);
    }
    let rep = run_eval(&m2, &BenchConfig::default(), None).unwrap();
    for s in &rep.samples {
        assert!(s.aki > 0, "{s:?}");
    }
    assert_eq!(rep.overall.k_gain, 1.0);
}

#[test]
fn unreadable_refined_is_one_skip() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 3, 1.0, 8);
    let mut m = with_refined(&m, |e| e.generated_path.clone());
    std::fs::write(dir.path().join("broken.png"), b"not a png").unwrap();
    m.entries[1].refined_path = Some("broken.png".into());
    let rep = run_eval(&m, &BenchConfig::default(), None).unwrap();
    assert_eq!(rep.samples.len(), 2);
    assert_eq!(rep.skips.len(), 1);
    assert_eq!(rep.skips[0].sample_id, "s0001");
    assert_eq!(rep.overall.n_samples, 2);
}

#[test]
fn all_skipped_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 2, 1.0, 8);
    assert!(run_eval(&m, &BenchConfig::default(), None).is_err());
}

fn outside_identical(a: &Image, b: &Image, r: &CropRegion) -> bool {
    (0..a.height()).all(|y| {
        (0..a.width()).all(|x| {
            r.contains(x, y) || (0..a.channels()).all(|c| a.get(x, y, c) == b.get(x, y, c))
        })
    })
}

#[test]
fn identity_refine_preserves_the_image() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(&dir.path().join("in"), 3, 1.0, 13);
    let out = run_refine(
        &m,
        &IdentityRefiner,
        &BenchConfig::default(),
        &dir.path().join("out"),
    )
    .unwrap();
    assert!(out.skips.is_empty(), "{:?}", out.skips);
    for (rec, e) in out.records.iter().zip(&out.manifest.entries) {
        let gen = load_image(&e.generated_path).unwrap();
        let refd = load_image(e.refined_path.as_ref().unwrap()).unwrap();
        assert!(outside_identical(&gen, &refd, &rec.region));
        let max = gen
            .data()
            .iter()
            .zip(refd.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max);
        assert!(max <= 1.0 / 255.0 + 1e-6, "{max}");
    }
}

struct Shrink;

impl Refiner for Shrink {
    fn refine(&self, job: &RefineJob) -> Result<Image, String> {
        Ok(Image::filled(job.crop.width() - 1, job.crop.height(), 3, 0.5).unwrap())
    }
}

struct Scribble;

impl Refiner for Scribble {
    fn refine(&self, job: &RefineJob) -> Result<Image, String> {
        Ok(job.crop.map(|v| 1.0 - v))
    }
}

#[test]
fn wrong_size_refiner_output_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(&dir.path().join("in"), 2, 1.0, 14);
    let out = run_refine(
        &m,
        &Shrink,
        &BenchConfig::default(),
        &dir.path().join("out"),
    )
    .unwrap();
    assert_eq!(out.skips.len(), 2);
    assert!(out.skips.iter().all(|s| s.reason.contains("dim mismatch")));
    assert!(out
        .manifest
        .entries
        .iter()
        .all(|e| e.refined_path.is_none()));
}

#[test]
fn arbitrary_refiner_never_touches_outside_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(&dir.path().join("in"), 2, 1.0, 15);
    let out = run_refine(
        &m,
        &Scribble,
        &BenchConfig::default(),
        &dir.path().join("out"),
    )
    .unwrap();
    assert_eq!(out.records.len(), 2);
    for (rec, e) in out.records.iter().zip(&out.manifest.entries) {
        let gen = load_image(&e.generated_path).unwrap();
        let refd = load_image(e.refined_path.as_ref().unwrap()).unwrap();
        assert!(outside_identical(&gen, &refd, &rec.region));
        assert_ne!(gen, refd);
    }
}

#[test]
fn constant_generated_is_not_localized() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = corpus(&dir.path().join("in"), 1, 1.0, 16);
    save_image(
        &Image::filled(320, 320, 3, 0.3).unwrap(),
        dir.path().join("in/flat.png"),
    )
    .unwrap();
    m.entries[0].generated_path = "flat.png".into();
    let crops =
        export_subject_crops(&m, &BenchConfig::default(), &dir.path().join("crops")).unwrap();
    assert!(crops.entries.is_empty());
    assert!(
        crops.skips[0].reason.contains("subject not localized"),
        "{:?}",
        crops.skips
    );
    let out = run_refine(
        &m,
        &WarpRefiner,
        &BenchConfig::default(),
        &dir.path().join("out"),
    )
    .unwrap();
    assert!(out.skips[0].reason.contains("subject not localized"));
}

#[test]
fn crop_covers_an_exact_subject_copy() {
    let dir = tempfile::tempdir().unwrap();
    let subject = texture_image(192, 192, 70);
    let scene = scene_image(320, 320, 71);
    let h = planting_homography((192, 192), 1.0, 0.0, (150.0, 170.0), (0.0, 0.0));
    let (generated, _) = plant(&scene, &subject, &h);
    save_image(&subject, dir.path().join("s.png")).unwrap();
    save_image(&generated, dir.path().join("g.png")).unwrap();
    let mut m = Manifest::new(vec![ManifestEntry {
        sample_id: "paste".into(),
        subject_path: "s.png".into(),
        generated_path: "g.png".into(),
        refined_path: None,
        method_tag: "m".into(),
        backbone_tag: "b".into(),
    }]);
    m.base_dir = Some(dir.path().to_path_buf());
    let out = dir.path().join("crops");
    let a = export_subject_crops(&m, &BenchConfig::default(), &out).unwrap();
    let b = export_subject_crops(&m, &BenchConfig::default(), &out).unwrap();
    assert_eq!(a, b);
    let r = &a.entries[0].region;
    let mut inside = 0;
    for y in 0..192 {
        for x in 0..192 {
            let (u, v) = apply_homography(&h, x as f64, y as f64).unwrap();
            if r.contains(u.round() as usize, v.round() as usize) {
                inside += 1;
            }
        }
    }
    assert!(
        inside as f64 >= 0.9 * 192.0 * 192.0,
        "{inside} of {} in {r:?}",
        192 * 192
    );
    let crop = load_image(&a.entries[0].generated_crop_path).unwrap();
    assert_eq!(crop.dims(), (r.w, r.h));
}

fn report_of(samples: Vec<SampleResult>) -> EvalReport {
    let overall = if samples.is_empty() {
        aggregate(&[SampleResult::new("x", 0, 0)], 0).unwrap()
    } else {
        aggregate(&samples, 0).unwrap()
    };
    EvalReport {
        schema_version: "fidelkit-report-v1".into(),
        tool_version: "test".into(),
        config: BenchConfig::default(),
        rng_seed: 0,
        tau: 0,
        overall,
        samples,
        skips: vec![],
        groups: vec![],
        generated_at: None,
    }
}

#[test]
fn scatter_csv_rows_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    emit_scatter(
        &report_of(vec![SampleResult::new("s1", 80, 120)]),
        &p,
        ScatterFormat::Csv,
    )
    .unwrap();
    assert_eq!(
        std::fs::read_to_string(&p).unwrap(),
        "sample_id,n_base,n_refined,aki\ns1,80,120,40\n"
    );

    let samples: Vec<SampleResult> = (0..20)
        .map(|i| SampleResult::new(format!("x{i}"), i * 3, 50 - i))
        .collect();
    let akis: Vec<i64> = samples.iter().map(|s| s.aki).collect();
    emit_scatter(&report_of(samples), &p, ScatterFormat::Csv).unwrap();
    let back: Vec<i64> = read_scatter_csv(&p)
        .unwrap()
        .iter()
        .map(|r| r.aki)
        .collect();
    assert_eq!(back, akis);

    let svg = dir.path().join("s.svg");
    emit_scatter(
        &report_of(vec![SampleResult::new("s1", 80, 120)]),
        &svg,
        ScatterFormat::Svg,
    )
    .unwrap();
    assert!(std::fs::read_to_string(&svg)
        .unwrap()
        .contains("stroke-dasharray"));
    assert!(emit_scatter(&report_of(vec![]), &svg, ScatterFormat::Svg).is_err());
}
