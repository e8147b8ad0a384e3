//! FAST-9 corner test, arc score, 3x3 non-maximum suppression and
//! intensity-centroid orientation.

use std::sync::OnceLock;

use crate::imgcore::Image;

use super::pyramid::to_base;
use super::Keypoint;

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
pub const CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

/// Minimum contiguous arc length.
pub const ARC_LEN: usize = 9;

/// Radius of the disk used for the intensity centroid.
pub const ORIENTATION_RADIUS: isize = 15;

/// FAST-9 arc score at `(x, y)`, or `None` if the pixel is not a corner.
///
/// The score is the sum of `|p - center|` over the maximal contiguous arc of
/// circle pixels that are all brighter than `center + t` (or all darker than
/// `center - t`).
pub fn corner_score(img: &Image, x: usize, y: usize, threshold: f32) -> Option<f32> {
    let c = img.get(x, y, 0);
    let mut vals = [0f32; 16];
    let mut class = [0i8; 16];
    for (i, &(dx, dy)) in CIRCLE.iter().enumerate() {
        let p = img.get((x as isize + dx) as usize, (y as isize + dy) as usize, 0);
        vals[i] = p;
        class[i] = if p > c + threshold {
            1
        } else if p < c - threshold {
            -1
        } else {
            0
        };
    }
    let mut best: Option<f32> = None;
    for sign in [1i8, -1] {
        if class.iter().all(|&k| k == sign) {
            let s: f32 = vals.iter().map(|p| (p - c).abs()).sum();
            return Some(s);
        }
        // Start just after a non-member so every run is seen whole.
        let Some(start) = (0..16).find(|&i| class[i] != sign) else {
            continue;
        };
        let mut run = 0usize;
        let mut sum = 0f32;
        for step in 1..=16 {
            let i = (start + step) % 16;
            if class[i] == sign {
                run += 1;
                sum += (vals[i] - c).abs();
            } else {
                if run >= ARC_LEN {
                    best = Some(best.map_or(sum, |b| b.max(sum)));
                }
                run = 0;
                sum = 0.0;
            }
        }
    }
    best
}

/// Raster-order NMS over a dense score map (0 = no corner). Ties are resolved
/// in favour of the earlier pixel.
fn suppress(scores: &[f32], w: usize, h: usize) -> Vec<(usize, usize, f32)> {
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let s = scores[y * w + x];
            if s <= 0.0 {
                continue;
            }
            let mut keep = true;
            'nb: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let n = scores[ny as usize * w + nx as usize];
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if n > s || (n == s && earlier) {
                        keep = false;
                        break 'nb;
                    }
                }
            }
            if keep {
                out.push((x, y, s));
            }
        }
    }
    out
}

fn disk_offsets() -> &'static [(isize, isize)] {
    static DISK: OnceLock<Vec<(isize, isize)>> = OnceLock::new();
    DISK.get_or_init(|| {
        let r = ORIENTATION_RADIUS;
        let mut v = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    v.push((dx, dy));
                }
            }
        }
        v
    })
}

/// `atan2(m01, m10)` of the intensity moments over a radius-15 disk,
/// clamp-to-edge.
pub fn intensity_centroid_angle(img: &Image, x: usize, y: usize) -> f64 {
    let (mut m10, mut m01) = (0f64, 0f64);
    for &(dx, dy) in disk_offsets() {
        let v = img.get_clamped(x as isize + dx, y as isize + dy, 0) as f64;
        m10 += dx as f64 * v;
        m01 += dy as f64 * v;
    }
    m01.atan2(m10)
}

/// FAST-9 keypoints of one pyramid level, already in level-0 coordinates.
pub(crate) fn detect_level(
    level_img: &Image,
    octave: usize,
    base_dims: (usize, usize),
    threshold: f32,
    max_keep: usize,
    border: usize,
) -> Vec<Keypoint> {
    let (w, h) = level_img.dims();
    let border = border.max(3);
    if w <= 2 * border || h <= 2 * border {
        return Vec::new();
    }
    let mut scores = vec![0f32; w * h];
    for y in border..h - border {
        for x in border..w - border {
            if let Some(s) = corner_score(level_img, x, y, threshold) {
                scores[y * w + x] = s;
            }
        }
    }
    let mut corners = suppress(&scores, w, h);
    corners.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
    corners.truncate(max_keep);
    corners
        .into_iter()
        .map(|(x, y, s)| Keypoint {
            x: to_base(x as f64, w, base_dims.0),
            y: to_base(y as f64, h, base_dims.1),
            orientation: intensity_centroid_angle(level_img, x, y),
            response: s as f64,
            octave,
        })
        .collect()
}
