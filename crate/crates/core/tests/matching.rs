use fidelkit::imgcore::rotate_about_center;
use fidelkit::keypoints::{detect_and_describe, Descriptor, DetectorConfig};
use fidelkit::matching::{
    match_count, match_descriptors, mutual_nearest, project, verify_correspondences, GeomModel,
    MatcherConfig, ModelKind, PointPair, RansacConfig,
};
use fidelkit::synth::texture_image;
use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corner_error(model: &GeomModel, truth: &Matrix3<f64>, w: f64, h: f64) -> f64 {
    [
        [0.0, 0.0],
        [w - 1.0, 0.0],
        [0.0, h - 1.0],
        [w - 1.0, h - 1.0],
    ]
    .iter()
    .map(|&p| {
        let a = model.apply(p).unwrap();
        let b = project(truth, p).unwrap();
        (a[0] - b[0]).hypot(a[1] - b[1])
    })
    .fold(0.0, f64::max)
}

#[test]
fn self_match_floor_and_identity_model() {
    let x = texture_image(512, 512, 2024);
    let r = match_count(&x, &x, &MatcherConfig::default()).unwrap();
    let n = r.kps_ref.len();
    assert!(n > 200, "only {n} keypoints");
    assert!(r.count as f64 >= 0.8 * n as f64, "{} of {n}", r.count);
    let err = corner_error(
        r.matchset.model.as_ref().unwrap(),
        &Matrix3::identity(),
        512.0,
        512.0,
    );
    assert!(err < 1.0, "corner error {err}");
}

#[test]
fn rotated_copy_recovers_rotation() {
    let x = texture_image(400, 400, 77);
    let rot = rotate_about_center(&x, 30.0);
    let r = match_count(&x, &rot, &MatcherConfig::default()).unwrap();
    assert!(r.count > 0);
    // Output pixel x samples the input at R(x - c) + c, so content moves by R^-1.
    let (s, c) = 30f64.to_radians().sin_cos();
    let cx = 199.5;
    let to_origin = Matrix3::new(1.0, 0.0, -cx, 0.0, 1.0, -cx, 0.0, 0.0, 1.0);
    let back = Matrix3::new(1.0, 0.0, cx, 0.0, 1.0, cx, 0.0, 0.0, 1.0);
    let rm = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
    let truth = back * rm * to_origin;
    let err = corner_error(r.matchset.model.as_ref().unwrap(), &truth, 400.0, 400.0);
    assert!(err < 2.0, "corner error {err}, count {}", r.count);
}

#[test]
fn match_count_is_deterministic() {
    let x = texture_image(256, 256, 8);
    let y = rotate_about_center(&x, 10.0);
    let cfg = MatcherConfig::default();
    let a = match_count(&x, &y, &cfg).unwrap();
    let b = match_count(&x, &y, &cfg).unwrap();
    assert_eq!(
        serde_json::to_vec(&a.matchset).unwrap(),
        serde_json::to_vec(&b.matchset).unwrap()
    );
}

#[test]
fn constant_image_yields_no_keypoints_and_zero_count() {
    let flat = fidelkit::Image::filled(128, 128, 3, 0.4).unwrap();
    let set = detect_and_describe(&flat, "flat", &DetectorConfig::default()).unwrap();
    assert!(set.is_empty());
}

fn planted_pairs(
    kind: ModelKind,
    n: usize,
    inlier_frac: f64,
    seed: u64,
) -> (Vec<PointPair>, usize, Matrix3<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle: f64 = rng.gen_range(-0.5..0.5);
    let scale: f64 = rng.gen_range(0.8..1.25);
    let (s, c) = angle.sin_cos();
    let (g, h) = match kind {
        ModelKind::Affine => (0.0, 0.0),
        ModelKind::Homography => (rng.gen_range(-3e-4..3e-4), rng.gen_range(-3e-4..3e-4)),
    };
    let truth = Matrix3::new(
        scale * c,
        -scale * s,
        rng.gen_range(-50.0..50.0),
        scale * s,
        scale * c,
        rng.gen_range(-50.0..50.0),
        g,
        h,
        1.0,
    );
    let n_in = (n as f64 * inlier_frac).round() as usize;
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n_in {
        let p = [rng.gen_range(0.0..512.0), rng.gen_range(0.0..512.0)];
        let q = project(&truth, p).unwrap();
        pairs.push((
            p,
            [
                q[0] + rng.gen_range(-0.3..0.3),
                q[1] + rng.gen_range(-0.3..0.3),
            ],
        ));
    }
    for _ in n_in..n {
        pairs.push((
            [rng.gen_range(0.0..512.0), rng.gen_range(0.0..512.0)],
            [rng.gen_range(-50.0..600.0), rng.gen_range(-50.0..600.0)],
        ));
    }
    (pairs, n_in, truth)
}

#[test]
fn planted_recovery_rate_at_sixty_percent_inliers() {
    for kind in [ModelKind::Affine, ModelKind::Homography] {
        let mut ok = 0;
        for trial in 0..100 {
            let (pairs, n_in, _) = planted_pairs(kind, 40, 0.6, 1000 + trial);
            let cfg = RansacConfig {
                kind,
                inlier_px: 2.0,
                seed: trial,
                ..Default::default()
            };
            let v = verify_correspondences(&pairs, &cfg);
            let kept = v.inlier_mask[..n_in].iter().filter(|&&m| m).count();
            let outl = v.inlier_mask[n_in..].iter().filter(|&&m| m).count();
            if kept as f64 >= 0.95 * n_in as f64 && outl <= 2 {
                ok += 1;
            }
        }
        assert!(ok >= 99, "{kind:?}: {ok}/100");
    }
}

fn random_descriptors(n: usize, seed: u64, noise_from: Option<&[Descriptor]>) -> Vec<Descriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| match noise_from {
            Some(base) if i < base.len() => {
                let mut d = base[i];
                for _ in 0..rng.gen_range(0..40) {
                    let bit = rng.gen_range(0..256);
                    d.0[bit / 64] ^= 1 << (bit % 64);
                }
                d
            }
            _ => Descriptor(rng.gen()),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mutual_nn_is_symmetric(seed in any::<u64>(), na in 1usize..60, nb in 1usize..60) {
        let a = random_descriptors(na, seed, None);
        let b = random_descriptors(nb, seed ^ 0xABCD, Some(&a));
        let mut ab: Vec<(usize, usize, u32)> = mutual_nearest(&a, &b).iter().map(|m| (m.idx_a, m.idx_b, m.distance)).collect();
        let mut ba: Vec<(usize, usize, u32)> = mutual_nearest(&b, &a).iter().map(|m| (m.idx_b, m.idx_a, m.distance)).collect();
        ab.sort();
        ba.sort();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn ratio_matches_are_subset_ordered_by_idx_a(seed in any::<u64>(), ratio in 0.05f64..=1.0) {
        let a = random_descriptors(40, seed, None);
        let b = random_descriptors(50, seed.wrapping_add(1), Some(&a));
        let m = match_descriptors(&a, &b, ratio).unwrap();
        let mnn = mutual_nearest(&a, &b);
        prop_assert!(m.windows(2).all(|w| w[0].idx_a < w[1].idx_a));
        for x in &m {
            prop_assert!(mnn.contains(x));
        }
    }

    #[test]
    fn stricter_threshold_never_adds_hypothesis_inliers(seed in any::<u64>(), t in 0.5f64..5.0, shrink in 0.1f64..1.0) {
        let (pairs, _, _) = planted_pairs(ModelKind::Affine, 40, 0.5, seed);
        let loose = RansacConfig { kind: ModelKind::Affine, inlier_px: t, max_iters: 200, confidence: 1.0, seed };
        let strict = RansacConfig { inlier_px: t * shrink, ..loose.clone() };
        let vl = verify_correspondences(&pairs, &loose);
        let vs = verify_correspondences(&pairs, &strict);
        prop_assert!(vs.hypothesis_inliers <= vl.hypothesis_inliers);
    }

    #[test]
    fn verification_is_deterministic(seed in any::<u64>()) {
        let (pairs, _, _) = planted_pairs(ModelKind::Homography, 30, 0.6, seed);
        let cfg = RansacConfig { seed, ..Default::default() };
        prop_assert_eq!(verify_correspondences(&pairs, &cfg), verify_correspondences(&pairs, &cfg));
    }
}
