//! Subject-centric crops and gradient-domain paste-back of refined crops.

mod poisson;
mod region;

pub use poisson::{solve_poisson, LinearSystem, PoissonSolution, SolverConfig};
pub use region::{
    crop_from_points, extract_crop, paste_crop, subject_crop, CropConfig, CropRegion,
    MIN_CROP_INLIERS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{Image, ImageError};

#[derive(Debug, Error)]
pub enum BlendError {
    #[error("subject not localized: {0} inliers, need at least {MIN_CROP_INLIERS}")]
    NotLocalized(usize),
    #[error("image side {dim} leaves no room for a crop snapped to {snap} px")]
    TooSmall { dim: usize, snap: usize },
    #[error("region {region:?} outside image of dims {dims:?}")]
    OutOfBounds {
        region: (usize, usize, usize, usize),
        dims: (usize, usize),
    },
    #[error("region {region:?} touches the border of an image of dims {dims:?}")]
    TouchesBorder {
        region: (usize, usize, usize, usize),
        dims: (usize, usize),
    },
    #[error("patch {patch:?} does not match region {region:?}")]
    PatchMismatch {
        patch: (usize, usize, usize),
        region: (usize, usize, usize),
    },
    #[error("system has no interior unknowns")]
    EmptySystem,
    #[error("malformed system: {0}")]
    System(String),
    #[error(
        "solver did not converge after {iterations} iterations (relative residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub type Result<T> = std::result::Result<T, BlendError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    /// Patch gradients as guidance.
    #[default]
    Seamless,
    /// Per edge, whichever of the patch and target gradients is larger.
    Mixed,
    /// No solve; linear feather over the outer 4 px of the region.
    Direct,
}

/// Width of the direct-mode feather.
pub const FEATHER_PX: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct BlendOutcome {
    pub image: Image,
    /// CG iterations per channel; empty for direct mode.
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
}

pub fn poisson_blend(
    target: &Image,
    patch: &Image,
    r: &CropRegion,
    mode: BlendMode,
) -> Result<Image> {
    poisson_blend_with(target, patch, r, mode, &SolverConfig::default()).map(|o| o.image)
}

/// Replaces the region's interior by the solution of the Poisson equation
/// whose Dirichlet boundary is the target's values on the region's own
/// outermost ring. Pixels outside the interior are copied unchanged.
pub fn poisson_blend_with(
    target: &Image,
    patch: &Image,
    r: &CropRegion,
    mode: BlendMode,
    solver: &SolverConfig,
) -> Result<BlendOutcome> {
    r.check_inside(target.dims())?;
    region::check_patch(target, patch, r)?;
    if !r.strictly_inside(target.dims()) {
        return Err(BlendError::TouchesBorder {
            region: (r.x0, r.y0, r.w, r.h),
            dims: target.dims(),
        });
    }
    if mode == BlendMode::Direct {
        return Ok(BlendOutcome {
            image: feather(target, patch, r),
            iterations: Vec::new(),
            residuals: Vec::new(),
        });
    }
    if r.w < 3 || r.h < 3 {
        return Err(BlendError::EmptySystem);
    }
    let (iw, ih) = (r.w - 2, r.h - 2);
    let channels = target.channels();
    let t = |x: usize, y: usize, c: usize| target.get(r.x0 + x, r.y0 + y, c) as f64;
    let s = |x: usize, y: usize, c: usize| patch.get(x, y, c) as f64;
    let mut frames = Vec::with_capacity(channels);
    let mut guidance = Vec::with_capacity(channels);
    let mut initial = Vec::with_capacity(channels);
    for c in 0..channels {
        frames.push(
            (0..r.w * r.h)
                .map(|i| t(i % r.w, i / r.w, c))
                .collect::<Vec<f64>>(),
        );
        let mut g = vec![0.0; iw * ih];
        for y in 0..ih {
            for x in 0..iw {
                let (px, py) = (x + 1, y + 1);
                let mut sum = 0.0;
                for (qx, qy) in [(px - 1, py), (px + 1, py), (px, py - 1), (px, py + 1)] {
                    let vp = s(px, py, c) - s(qx, qy, c);
                    sum += match mode {
                        BlendMode::Mixed => {
                            let vt = t(px, py, c) - t(qx, qy, c);
                            if vt.abs() > vp.abs() {
                                vt
                            } else {
                                vp
                            }
                        }
                        _ => vp,
                    };
                }
                g[y * iw + x] = sum;
            }
        }
        guidance.push(g);
        // Start from the patch shifted to the boundary's mean level.
        let ring: Vec<(usize, usize)> = (0..r.w * r.h)
            .map(|i| (i % r.w, i / r.w))
            .filter(|&(x, y)| x == 0 || y == 0 || x == r.w - 1 || y == r.h - 1)
            .collect();
        let offset = ring
            .iter()
            .map(|&(x, y)| t(x, y, c) - s(x, y, c))
            .sum::<f64>()
            / ring.len() as f64;
        initial.push(
            (0..iw * ih)
                .map(|k| s(k % iw + 1, k / iw + 1, c) + offset)
                .collect(),
        );
    }
    let sys = LinearSystem::new(iw, ih, &frames, &guidance)?.with_initial_guess(initial)?;
    let sol = solve_poisson(&sys, solver)?;
    let mut out = target.clone();
    for (c, vals) in sol.values.iter().enumerate() {
        for (k, v) in vals.iter().enumerate() {
            let (x, y) = (k % iw + 1, k / iw + 1);
            out.set(r.x0 + x, r.y0 + y, c, v.clamp(0.0, 1.0) as f32);
        }
    }
    Ok(BlendOutcome {
        image: out,
        iterations: sol.iterations,
        residuals: sol.residuals,
    })
}

fn feather(target: &Image, patch: &Image, r: &CropRegion) -> Image {
    let mut out = target.clone();
    for y in 0..r.h {
        for x in 0..r.w {
            let d = x.min(y).min(r.w - 1 - x).min(r.h - 1 - y);
            let a = ((d + 1) as f32 / FEATHER_PX as f32).min(1.0);
            for c in 0..target.channels() {
                let tv = target.get(r.x0 + x, r.y0 + y, c);
                let v = a * patch.get(x, y, c) + (1.0 - a) * tv;
                out.set(r.x0 + x, r.y0 + y, c, v.clamp(0.0, 1.0));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture_image;

    fn region(img: &Image, x0: usize, y0: usize, w: usize, h: usize) -> CropRegion {
        CropRegion::new(x0, y0, w, h, img.dims()).unwrap()
    }

    #[test]
    fn own_crop_is_identity() {
        let img = texture_image(90, 70, 3);
        let r = region(&img, 10, 12, 48, 40);
        let patch = extract_crop(&img, &r).unwrap();
        for mode in [BlendMode::Seamless, BlendMode::Mixed, BlendMode::Direct] {
            let out = poisson_blend(&img, &patch, &r, mode).unwrap();
            for (a, b) in out.data().iter().zip(img.data()) {
                assert!((a - b).abs() <= 1.0 / 255.0, "{mode:?}");
            }
        }
    }

    #[test]
    fn constant_patch_into_constant_target() {
        let target = Image::filled(40, 40, 3, 0.6).unwrap();
        let patch = Image::filled(20, 20, 3, 0.1).unwrap();
        let r = region(&target, 10, 10, 20, 20);
        let out = poisson_blend(&target, &patch, &r, BlendMode::Seamless).unwrap();
        for v in out.data() {
            assert!((v - 0.6).abs() < 1e-5);
        }
    }

    #[test]
    fn outside_and_ring_bit_identical() {
        let target = texture_image(64, 64, 4);
        let patch = texture_image(30, 26, 5);
        let r = region(&target, 17, 20, 30, 26);
        for mode in [BlendMode::Seamless, BlendMode::Mixed] {
            let out = poisson_blend(&target, &patch, &r, mode).unwrap();
            for y in 0..64 {
                for x in 0..64 {
                    let interior = x > r.x0 && y > r.y0 && x < r.x0 + r.w - 1 && y < r.y0 + r.h - 1;
                    if !interior {
                        for c in 0..3 {
                            assert_eq!(out.get(x, y, c).to_bits(), target.get(x, y, c).to_bits());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn border_region_and_mismatch_rejected() {
        let target = texture_image(32, 32, 6);
        let r = region(&target, 0, 5, 10, 10);
        let patch = extract_crop(&target, &r).unwrap();
        assert!(matches!(
            poisson_blend(&target, &patch, &r, BlendMode::Seamless),
            Err(BlendError::TouchesBorder { .. })
        ));
        let r = region(&target, 5, 5, 10, 10);
        let small = Image::filled(9, 10, 3, 0.0).unwrap();
        assert!(matches!(
            poisson_blend(&target, &small, &r, BlendMode::Seamless),
            Err(BlendError::PatchMismatch { .. })
        ));
    }

    #[test]
    fn direct_feather_ramps_to_patch() {
        let target = Image::filled(30, 30, 1, 0.0).unwrap();
        let patch = Image::filled(20, 20, 1, 1.0).unwrap();
        let r = region(&target, 5, 5, 20, 20);
        let out = poisson_blend(&target, &patch, &r, BlendMode::Direct).unwrap();
        assert_eq!(out.get(5, 15, 0), 0.25);
        assert_eq!(out.get(6, 15, 0), 0.5);
        assert_eq!(out.get(8, 15, 0), 1.0);
        assert_eq!(out.get(4, 15, 0), 0.0);
    }
}
