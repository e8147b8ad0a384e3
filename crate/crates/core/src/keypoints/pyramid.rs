use crate::imgcore::{gaussian_blur, resize, Image};

use super::{KeypointError, Result};

/// Smallest side any pyramid level may have.
pub const MIN_LEVEL_SIDE: usize = 16;

/// Blur applied to the previous level before it is downsampled.
pub const PYRAMID_BLUR_SIGMA: f64 = 1.0;

/// Side length of level `k`: `floor(base / factor^k)`.
pub fn level_side(base: usize, scale_factor: f64, level: usize) -> usize {
    // Tiny slack so that e.g. 640 / 1.25 lands on 512 rather than 511.999...
    (base as f64 / scale_factor.powi(level as i32) + 1e-9).floor() as usize
}

/// Gray scale pyramid. Level 0 is the input; level `k` is the previous level
/// blurred with sigma 1 and resized to `floor(dim / factor^k)`. Construction
/// stops before any side would drop below 16 pixels.
pub fn build_pyramid(img: &Image, levels: usize, scale_factor: f64) -> Result<Vec<Image>> {
    if levels == 0 {
        return Err(KeypointError::InvalidConfig("levels must be >= 1".into()));
    }
    if scale_factor.is_nan() || scale_factor <= 1.0 {
        return Err(KeypointError::InvalidConfig(format!(
            "scale_factor must be > 1, got {scale_factor}"
        )));
    }
    if img.channels() != 1 {
        return Err(KeypointError::Image(crate::imgcore::ImageError::Channels {
            expected: 1,
            got: img.channels(),
        }));
    }
    let (w0, h0) = img.dims();
    let mut out = vec![img.clone()];
    for k in 1..levels {
        let (w, h) = (
            level_side(w0, scale_factor, k),
            level_side(h0, scale_factor, k),
        );
        if w < MIN_LEVEL_SIDE || h < MIN_LEVEL_SIDE {
            break;
        }
        let prev = out.last().expect("level 0 present");
        let smoothed = gaussian_blur(prev, PYRAMID_BLUR_SIGMA)?;
        out.push(resize(&smoothed, w, h)?);
    }
    Ok(out)
}

/// Maps a level coordinate to level-0 coordinates (pixel-center aligned).
#[inline]
pub fn to_base(coord: f64, level_side: usize, base_side: usize) -> f64 {
    (coord + 0.5) * base_side as f64 / level_side as f64 - 0.5
}

/// Inverse of [`to_base`].
#[inline]
pub fn from_base(coord: f64, level_side: usize, base_side: usize) -> f64 {
    (coord + 0.5) * level_side as f64 / base_side as f64 - 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level_is_the_input() {
        let img = Image::filled(40, 30, 1, 0.5).unwrap();
        let p = build_pyramid(&img, 1, 1.2).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0], img);
    }

    #[test]
    fn level_dims_follow_floor_rule() {
        let img = Image::filled(640, 480, 1, 0.5).unwrap();
        let dims: Vec<_> = build_pyramid(&img, 4, 1.25)
            .unwrap()
            .iter()
            .map(|l| l.dims())
            .collect();
        assert_eq!(dims, vec![(640, 480), (512, 384), (409, 307), (327, 245)]);
    }

    #[test]
    fn stops_before_sixteen() {
        let img = Image::filled(20, 20, 1, 0.5).unwrap();
        assert_eq!(build_pyramid(&img, 5, 2.0).unwrap().len(), 1);
    }

    #[test]
    fn rejects_bad_parameters() {
        let img = Image::filled(20, 20, 1, 0.5).unwrap();
        assert!(build_pyramid(&img, 0, 2.0).is_err());
        assert!(build_pyramid(&img, 3, 1.0).is_err());
    }

    #[test]
    fn coordinate_maps_are_inverse() {
        for c in [0.0, 3.25, 99.0] {
            let b = to_base(c, 83, 100);
            assert!((from_base(b, 83, 100) - c).abs() < 1e-12);
        }
    }
}
