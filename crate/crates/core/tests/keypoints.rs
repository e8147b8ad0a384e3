use fidelkit::imgcore::Image;
use fidelkit::keypoints::{detect_and_describe, DetectorConfig, KeypointSet, DESCRIPTOR_BORDER};
use fidelkit::synth::texture_image;

fn fixture() -> KeypointSet {
    detect_and_describe(
        &texture_image(512, 512, 2024),
        "fixture",
        &DetectorConfig::default(),
    )
    .unwrap()
}

fn octave_histogram(k: &KeypointSet) -> Vec<usize> {
    let mut h = vec![0; DetectorConfig::default().levels];
    for kp in &k.keypoints {
        h[kp.octave] += 1;
    }
    h
}

#[test]
fn frozen_snapshot_on_textured_fixture() {
    let k = fixture();
    assert_eq!(k.len(), 1589);
    assert_eq!(
        octave_histogram(&k),
        vec![500, 499, 248, 138, 93, 55, 33, 23]
    );
    let top = k.keypoints[0];
    assert_eq!((top.x, top.y, top.octave), (219.0, 134.0, 0));
    assert!((top.orientation - -2.5431027332810867).abs() < 1e-9);
    assert_eq!(
        k.descriptors[0].to_bytes(),
        [
            191, 4, 198, 58, 50, 34, 83, 184, 219, 38, 97, 86, 29, 145, 84, 94, 222, 69, 252, 198,
            15, 104, 5, 95, 81, 217, 81, 41, 227, 170, 20, 33
        ]
    );
}

#[test]
fn detection_is_deterministic() {
    let a = fixture();
    let b = fixture();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a.to_json()).unwrap(),
        serde_json::to_string(&b.to_json()).unwrap()
    );
}

#[test]
fn keypoints_respect_budget_and_border() {
    let cfg = DetectorConfig {
        max_total: 300,
        ..Default::default()
    };
    let k = detect_and_describe(&texture_image(400, 300, 8), "t", &cfg).unwrap();
    assert_eq!(k.len(), 300);
    assert!(k
        .keypoints
        .windows(2)
        .all(|w| w[0].response >= w[1].response));
    for kp in &k.keypoints {
        assert!(
            kp.x >= DESCRIPTOR_BORDER && kp.x <= 399.0 - DESCRIPTOR_BORDER,
            "{kp:?}"
        );
        assert!(
            kp.y >= DESCRIPTOR_BORDER && kp.y <= 299.0 - DESCRIPTOR_BORDER,
            "{kp:?}"
        );
    }
}

#[test]
fn integer_shift_moves_level_zero_keypoints() {
    let big = texture_image(300, 300, 12);
    let (dx, dy) = (13, 7);
    let shifted = Image::new(
        260,
        260,
        3,
        (0..260 * 260 * 3)
            .map(|i| {
                let (p, c) = (i / 3, i % 3);
                big.get(p % 260 + dx, p / 260 + dy, c)
            })
            .collect(),
    )
    .unwrap();
    let cfg = DetectorConfig {
        levels: 1,
        ..Default::default()
    };
    let a = detect_and_describe(&big, "a", &cfg).unwrap();
    let b = detect_and_describe(&shifted, "b", &cfg).unwrap();
    let moved: std::collections::HashSet<(i64, i64)> = b
        .keypoints
        .iter()
        .map(|k| (k.x as i64 + dx as i64, k.y as i64 + dy as i64))
        .collect();
    let inner: Vec<_> = a
        .keypoints
        .iter()
        .filter(|k| k.x >= 60.0 && k.y >= 60.0 && k.x <= 240.0 && k.y <= 240.0)
        .collect();
    let found = inner
        .iter()
        .filter(|k| moved.contains(&(k.x as i64, k.y as i64)))
        .count();
    assert!(!inner.is_empty());
    assert!(
        found as f64 >= 0.9 * inner.len() as f64,
        "{found} of {}",
        inner.len()
    );
}

#[test]
fn constant_image_has_no_keypoints() {
    let k = detect_and_describe(
        &Image::filled(128, 128, 3, 0.7).unwrap(),
        "flat",
        &DetectorConfig::default(),
    )
    .unwrap();
    assert!(k.is_empty());
}
