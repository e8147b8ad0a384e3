//! Subject-centric crop rectangles and raw crop/paste.

use serde::{Deserialize, Serialize};

use crate::imgcore::Image;
use crate::keypoints::KeypointSet;
use crate::matching::MatchSet;

use super::{BlendError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropConfig {
    /// Fraction of the inlier extent added on each side.
    pub margin: f64,
    pub snap: usize,
    pub min_size: usize,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            margin: 0.15,
            snap: 8,
            min_size: 64,
        }
    }
}

/// Axis-aligned rectangle `[x0, x0 + w) x [y0, y0 + h)` inside a source image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropRegion {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
    pub source_width: usize,
    pub source_height: usize,
    pub margin_applied: f64,
    pub snap: usize,
    /// Set when the image border forced a shift or shrink.
    pub border_adjusted: bool,
}

impl CropRegion {
    /// A plain rectangle; errors if it leaves the source image or is empty.
    pub fn new(x0: usize, y0: usize, w: usize, h: usize, source: (usize, usize)) -> Result<Self> {
        let r = Self {
            x0,
            y0,
            w,
            h,
            source_width: source.0,
            source_height: source.1,
            margin_applied: 0.0,
            snap: 1,
            border_adjusted: false,
        };
        r.check_inside(source)?;
        Ok(r)
    }

    pub fn full(source: (usize, usize)) -> Self {
        Self::new(0, 0, source.0, source.1, source).expect("full image region is valid")
    }

    pub fn check_inside(&self, dims: (usize, usize)) -> Result<()> {
        if self.w == 0 || self.h == 0 || self.x0 + self.w > dims.0 || self.y0 + self.h > dims.1 {
            return Err(BlendError::OutOfBounds {
                region: (self.x0, self.y0, self.w, self.h),
                dims,
            });
        }
        Ok(())
    }

    /// True when a 1-px ring of target pixels surrounds the region.
    pub fn strictly_inside(&self, dims: (usize, usize)) -> bool {
        self.x0 >= 1 && self.y0 >= 1 && self.x0 + self.w < dims.0 && self.y0 + self.h < dims.1
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && y >= self.y0 && x < self.x0 + self.w && y < self.y0 + self.h
    }
}

/// One axis of the crop: returns `(start, len, adjusted)`.
fn fit_axis(
    lo: f64,
    hi: f64,
    margin: f64,
    snap: usize,
    min_size: usize,
    dim: usize,
) -> Result<(usize, usize, bool)> {
    // Pixel i covers [i, i + 1) on the extent axis.
    let x_lo = (lo + 0.5).floor();
    let x_hi = (hi + 0.5).floor() + 1.0;
    let extent = x_hi - x_lo;
    let mut a = (x_lo - margin * extent).floor();
    let mut b = (x_hi + margin * extent).ceil();
    if b - a < min_size as f64 {
        let center = (a + b) / 2.0;
        a = (center - min_size as f64 / 2.0 + 0.5).floor();
        b = a + min_size as f64;
    }
    let snap = snap.max(1);
    let mut len = ((b - a) as usize).div_ceil(snap) * snap;
    // Keep a 1-px ring of target pixels on both sides.
    let avail = dim.saturating_sub(2);
    let mut adjusted = false;
    if len > avail {
        len = avail / snap * snap;
        adjusted = true;
        if len == 0 {
            return Err(BlendError::TooSmall { dim, snap });
        }
    }
    let mut start = a;
    if start < 1.0 {
        start = 1.0;
        adjusted = true;
    }
    if start as usize + len > dim - 1 {
        start = (dim - 1 - len) as f64;
        adjusted = true;
    }
    Ok((start as usize, len, adjusted))
}

/// Bounding box of `points`, expanded by the margin, floored at `min_size`,
/// snapped, and fitted inside the image with a 1-px ring to spare.
pub fn crop_from_points(
    points: &[[f64; 2]],
    dims: (usize, usize),
    cfg: &CropConfig,
) -> Result<CropRegion> {
    if points.is_empty() {
        return Err(BlendError::NotLocalized(0));
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, axis: usize| {
        points.iter().map(|p| p[axis]).fold(init, f)
    };
    let (x_min, x_max) = (
        fold(f64::min, f64::INFINITY, 0),
        fold(f64::max, f64::NEG_INFINITY, 0),
    );
    let (y_min, y_max) = (
        fold(f64::min, f64::INFINITY, 1),
        fold(f64::max, f64::NEG_INFINITY, 1),
    );
    let (x0, w, ax) = fit_axis(x_min, x_max, cfg.margin, cfg.snap, cfg.min_size, dims.0)?;
    let (y0, h, ay) = fit_axis(y_min, y_max, cfg.margin, cfg.snap, cfg.min_size, dims.1)?;
    Ok(CropRegion {
        x0,
        y0,
        w,
        h,
        source_width: dims.0,
        source_height: dims.1,
        margin_applied: cfg.margin,
        snap: cfg.snap.max(1),
        border_adjusted: ax || ay,
    })
}

/// Minimum number of verified inliers needed to place a crop.
pub const MIN_CROP_INLIERS: usize = 4;

/// Crop around the inlier keypoints of `kps_gen` (the `idx_b` side of
/// `verified`).
pub fn subject_crop(
    verified: &MatchSet,
    kps_gen: &KeypointSet,
    dims: (usize, usize),
    cfg: &CropConfig,
) -> Result<CropRegion> {
    let points: Vec<[f64; 2]> = verified
        .inliers()
        .map(|m| kps_gen.position(m.idx_b))
        .collect();
    if points.len() < MIN_CROP_INLIERS {
        return Err(BlendError::NotLocalized(points.len()));
    }
    crop_from_points(&points, dims, cfg)
}

pub fn extract_crop(img: &Image, r: &CropRegion) -> Result<Image> {
    r.check_inside(img.dims())?;
    let c = img.channels();
    let mut data = Vec::with_capacity(r.w * r.h * c);
    for y in r.y0..r.y0 + r.h {
        let start = (y * img.width() + r.x0) * c;
        data.extend_from_slice(&img.data()[start..start + r.w * c]);
    }
    Ok(Image::new(r.w, r.h, c, data)?)
}

/// Raw copy of `patch` into `target` at `r`.
pub fn paste_crop(target: &Image, patch: &Image, r: &CropRegion) -> Result<Image> {
    r.check_inside(target.dims())?;
    check_patch(target, patch, r)?;
    let mut out = target.clone();
    for y in 0..r.h {
        for x in 0..r.w {
            for ch in 0..target.channels() {
                out.set(r.x0 + x, r.y0 + y, ch, patch.get(x, y, ch));
            }
        }
    }
    Ok(out)
}

pub(crate) fn check_patch(target: &Image, patch: &Image, r: &CropRegion) -> Result<()> {
    if patch.dims() != (r.w, r.h) || patch.channels() != target.channels() {
        return Err(BlendError::PatchMismatch {
            patch: (patch.width(), patch.height(), patch.channels()),
            region: (r.w, r.h, target.channels()),
        });
    }
    Ok(())
}
