//! Deterministic procedural fixtures: detailed "subject" textures, smooth
//! scenes, and scenes with a subject planted under a known homography.
//!
//! Everything here is a pure function of its seed, so fixtures never need to
//! be committed as binary files.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imgcore::{gaussian_blur, sample_bilinear, Image};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_color(r: &mut ChaCha8Rng, lo: f32, hi: f32) -> [f32; 3] {
    [
        r.gen_range(lo..hi),
        r.gen_range(lo..hi),
        r.gen_range(lo..hi),
    ]
}

fn paint(img: &mut Image, x: usize, y: usize, color: [f32; 3]) {
    for (c, v) in color.iter().enumerate().take(img.channels()) {
        img.set(x, y, c, *v);
    }
}

/// Busy RGB texture: gradient base plus random rectangles, disks, rings,
/// strokes and small glyph-like bitmaps. Rich in FAST corners.
pub fn texture_image(width: usize, height: usize, seed: u64) -> Image {
    let mut r = rng(seed);
    let base_a = random_color(&mut r, 0.2, 0.8);
    let base_b = random_color(&mut r, 0.2, 0.8);
    let mut img = Image::filled(width, height, 3, 0.0).expect("non-empty");
    for y in 0..height {
        for x in 0..width {
            let t = (x + y) as f32 / (width + height) as f32;
            let col = [0, 1, 2].map(|c| base_a[c] * (1.0 - t) + base_b[c] * t);
            paint(&mut img, x, y, col);
        }
    }
    let area = (width * height) as f64;
    let n_shapes = ((area / 900.0) as usize).max(8);
    for _ in 0..n_shapes {
        let color = random_color(&mut r, 0.0, 1.0);
        let cx = r.gen_range(0..width) as f64;
        let cy = r.gen_range(0..height) as f64;
        match r.gen_range(0..5) {
            0 => {
                let hw: f64 = r.gen_range(3.0..18.0);
                let hh = r.gen_range(3.0..18.0);
                let ang: f64 = r.gen_range(0.0..std::f64::consts::PI);
                let (s, c) = ang.sin_cos();
                fill_where(&mut img, cx, cy, hw.max(hh) * 1.5, color, |dx, dy| {
                    let u = c * dx + s * dy;
                    let v = -s * dx + c * dy;
                    u.abs() <= hw && v.abs() <= hh
                });
            }
            1 => {
                let rad = r.gen_range(3.0..14.0);
                fill_where(&mut img, cx, cy, rad, color, |dx, dy| {
                    dx * dx + dy * dy <= rad * rad
                });
            }
            2 => {
                let outer: f64 = r.gen_range(6.0..16.0);
                let inner = outer * r.gen_range(0.4..0.75);
                fill_where(&mut img, cx, cy, outer, color, |dx, dy| {
                    let d2 = dx * dx + dy * dy;
                    d2 <= outer * outer && d2 >= inner * inner
                });
            }
            3 => {
                let len: f64 = r.gen_range(10.0..40.0);
                let ang: f64 = r.gen_range(0.0..std::f64::consts::PI);
                let half_w = r.gen_range(0.8..2.2);
                let (s, c) = ang.sin_cos();
                fill_where(&mut img, cx, cy, len / 2.0 + 3.0, color, |dx, dy| {
                    let u = c * dx + s * dy;
                    let v = -s * dx + c * dy;
                    u.abs() <= len / 2.0 && v.abs() <= half_w
                });
            }
            _ => {
                // 5x7 glyph, 2-3 px per cell
                let cell = r.gen_range(2..4) as f64;
                let bits: u64 = r.gen();
                fill_where(&mut img, cx, cy, 4.0 * cell, color, |dx, dy| {
                    let gx = ((dx + 2.5 * cell) / cell).floor();
                    let gy = ((dy + 3.5 * cell) / cell).floor();
                    if !(0.0..5.0).contains(&gx) || !(0.0..7.0).contains(&gy) {
                        return false;
                    }
                    let bit = gy as u64 * 5 + gx as u64;
                    (bits >> bit) & 1 == 1
                });
            }
        }
    }
    img
}

fn fill_where(
    img: &mut Image,
    cx: f64,
    cy: f64,
    reach: f64,
    color: [f32; 3],
    inside: impl Fn(f64, f64) -> bool,
) {
    let (w, h) = img.dims();
    let x0 = (cx - reach).floor().max(0.0) as usize;
    let y0 = (cy - reach).floor().max(0.0) as usize;
    let x1 = ((cx + reach).ceil() as usize).min(w - 1);
    let y1 = ((cy + reach).ceil() as usize).min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            if inside(x as f64 - cx, y as f64 - cy) {
                paint(img, x, y, color);
            }
        }
    }
}

/// Smooth RGB scene: two-color gradient plus a few large soft blobs. Has few
/// corners of its own.
pub fn scene_image(width: usize, height: usize, seed: u64) -> Image {
    let mut r = rng(seed);
    let a = random_color(&mut r, 0.25, 0.75);
    let b = random_color(&mut r, 0.25, 0.75);
    let blobs: Vec<(f64, f64, f64, [f32; 3])> = (0..4)
        .map(|_| {
            (
                r.gen_range(0.0..width as f64),
                r.gen_range(0.0..height as f64),
                r.gen_range(0.15..0.35) * width.min(height) as f64,
                random_color(&mut r, -0.15, 0.15),
            )
        })
        .collect();
    let mut img = Image::filled(width, height, 3, 0.0).expect("non-empty");
    for y in 0..height {
        for x in 0..width {
            let t = y as f32 / height as f32;
            let mut col = [0, 1, 2].map(|c| a[c] * (1.0 - t) + b[c] * t);
            for &(bx, by, rad, tint) in &blobs {
                let d2 = ((x as f64 - bx).powi(2) + (y as f64 - by).powi(2)) / (rad * rad);
                let wgt = (-d2).exp() as f32;
                for c in 0..3 {
                    col[c] += wgt * tint[c];
                }
            }
            paint(&mut img, x, y, col.map(|v| v.clamp(0.0, 1.0)));
        }
    }
    img
}

/// Gray fixture for degradation checks: a smooth background carrying
/// high-passed fine texture in a few patches, levels kept inside `[0.2, 0.8]`.
pub fn detail_fixture(width: usize, height: usize, seed: u64) -> Image {
    let mut r = rng(seed);
    let patches: Vec<(usize, usize, usize, usize, u64)> = (0..3)
        .map(|_| {
            let pw = r.gen_range(width / 5..width / 3);
            let ph = r.gen_range(height / 5..height / 3);
            (
                r.gen_range(4..width - pw - 4),
                r.gen_range(4..height - ph - 4),
                pw,
                ph,
                r.gen(),
            )
        })
        .collect();
    let phase: f64 = r.gen_range(0.0..std::f64::consts::TAU);
    let mut img = Image::from_fn_gray(width, height, |x, y| {
        let u = x as f64 / width as f64;
        let v = y as f64 / height as f64;
        (0.5 + 0.08 * (u * 2.1 + phase).sin() + 0.06 * (v * 1.7).cos()) as f32
    })
    .expect("non-empty");
    for &(px, py, pw, ph, pseed) in &patches {
        // High-passed so the added detail carries no coarse structure.
        let tex = texture_image(pw, ph, pseed).to_grayscale();
        let coarse = crate::imgcore::gaussian_blur(&tex, 1.5).expect("valid sigma");
        for y in 0..ph {
            for x in 0..pw {
                let fine = tex.get(x, y, 0) - coarse.get(x, y, 0);
                let v = img.get(px + x, py + y, 0) + 0.8 * fine;
                img.set(px + x, py + y, 0, v.clamp(0.2, 0.8));
            }
        }
    }
    img
}

/// A 3x3 homography mapping subject coordinates into scene coordinates.
pub type Homography = Matrix3<f64>;

/// Similarity (scale, rotation about the subject center) followed by a
/// translation that puts the subject center at `(tx, ty)`, plus a small
/// projective term.
pub fn planting_homography(
    subject_dims: (usize, usize),
    scale: f64,
    angle_deg: f64,
    center: (f64, f64),
    perspective: (f64, f64),
) -> Homography {
    let (sw, sh) = subject_dims;
    let (s, c) = angle_deg.to_radians().sin_cos();
    let to_origin = Matrix3::new(
        1.0,
        0.0,
        -(sw as f64 - 1.0) / 2.0,
        0.0,
        1.0,
        -(sh as f64 - 1.0) / 2.0,
        0.0,
        0.0,
        1.0,
    );
    let persp = Matrix3::new(
        1.0,
        0.0,
        0.0,
        0.0,
        1.0,
        0.0,
        perspective.0,
        perspective.1,
        1.0,
    );
    let sim = Matrix3::new(
        scale * c,
        -scale * s,
        0.0,
        scale * s,
        scale * c,
        0.0,
        0.0,
        0.0,
        1.0,
    );
    let place = Matrix3::new(1.0, 0.0, center.0, 0.0, 1.0, center.1, 0.0, 0.0, 1.0);
    place * sim * persp * to_origin
}

pub fn apply_homography(h: &Homography, x: f64, y: f64) -> Option<(f64, f64)> {
    let v = h * nalgebra::Vector3::new(x, y, 1.0);
    (v[2].abs() > 1e-12).then(|| (v[0] / v[2], v[1] / v[2]))
}

/// Pastes `subject` into `scene` through `h` (subject -> scene). Returns the
/// composite and the axis-aligned bounding box `[x0, y0, x1, y1]` of the
/// covered pixels.
pub fn plant(scene: &Image, subject: &Image, h: &Homography) -> (Image, [usize; 4]) {
    let inv = h.try_inverse().expect("planting homography invertible");
    let mut out = scene.clone();
    let (sw, sh) = (subject.width() as f64, subject.height() as f64);
    let mut bbox = [usize::MAX, usize::MAX, 0, 0];
    for y in 0..scene.height() {
        for x in 0..scene.width() {
            let Some((sx, sy)) = apply_homography(&inv, x as f64, y as f64) else {
                continue;
            };
            if sx < -0.5 || sy < -0.5 || sx > sw - 0.5 || sy > sh - 0.5 {
                continue;
            }
            for c in 0..out.channels() {
                let sc = c.min(subject.channels() - 1);
                out.set(x, y, c, sample_bilinear(subject, sx, sy, sc));
            }
            bbox = [
                bbox[0].min(x),
                bbox[1].min(y),
                bbox[2].max(x),
                bbox[3].max(y),
            ];
        }
    }
    (out, bbox)
}

/// Blurs and adds seeded noise only inside `bbox`, mimicking the fine-detail
/// loss a generator inflicts on the subject.
pub fn degrade_region(
    img: &Image,
    bbox: [usize; 4],
    blur_sigma: f64,
    noise: f32,
    seed: u64,
) -> Image {
    let blurred = gaussian_blur(img, blur_sigma).expect("sigma >= 0");
    let mut r = rng(seed);
    let normal = rand_distr::Normal::new(0.0f32, 1.0).expect("valid normal");
    let mut out = img.clone();
    for y in bbox[1]..=bbox[3].min(img.height() - 1) {
        for x in bbox[0]..=bbox[2].min(img.width() - 1) {
            for c in 0..img.channels() {
                let n: f32 = r.sample(normal);
                out.set(x, y, c, (blurred.get(x, y, c) + noise * n).clamp(0.0, 1.0));
            }
        }
    }
    out
}

/// One generated sample of the synthetic benchmark.
#[derive(Clone, Debug)]
pub struct PlantedSample {
    pub subject: Image,
    pub generated: Image,
    pub homography: Homography,
    pub bbox: [usize; 4],
}

/// Blur applied to the planted region by [`planted_sample`].
pub const PLANT_BLUR_SIGMA: f64 = 1.6;

/// Noise standard deviation added to the planted region by [`planted_sample`].
pub const PLANT_NOISE: f32 = 0.03;

/// Subject of `subject_side`^2 warped into a `scene_side`^2 scene and then
/// degraded in place. Transform parameters are drawn from `seed`.
pub fn planted_sample(subject_side: usize, scene_side: usize, seed: u64) -> PlantedSample {
    planted_sample_with(
        subject_side,
        scene_side,
        PLANT_BLUR_SIGMA,
        PLANT_NOISE,
        seed,
    )
}

/// [`planted_sample`] with an explicit region degradation.
pub fn planted_sample_with(
    subject_side: usize,
    scene_side: usize,
    blur_sigma: f64,
    noise: f32,
    seed: u64,
) -> PlantedSample {
    let mut r = rng(seed ^ 0xA11C_E5ED);
    let subject = texture_image(
        subject_side,
        subject_side,
        seed.wrapping_mul(31).wrapping_add(7),
    );
    let scene = scene_image(
        scene_side,
        scene_side,
        seed.wrapping_mul(17).wrapping_add(3),
    );
    let scale = r.gen_range(0.85..1.1);
    let angle = r.gen_range(-20.0..20.0);
    let half = subject_side as f64 * scale * 0.75;
    let cx = r.gen_range(half..scene_side as f64 - half);
    let cy = r.gen_range(half..scene_side as f64 - half);
    let persp = (r.gen_range(-3e-4..3e-4), r.gen_range(-3e-4..3e-4));
    let h = planting_homography((subject_side, subject_side), scale, angle, (cx, cy), persp);
    let (planted, bbox) = plant(&scene, &subject, &h);
    let generated = degrade_region(&planted, bbox, blur_sigma, noise, seed ^ 0xDE6);
    PlantedSample {
        subject,
        generated: generated.quantized(),
        homography: h,
        bbox,
    }
}
