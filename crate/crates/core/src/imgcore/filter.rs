use super::{FloatMap, Image, ImageError, Result};

/// Normalized 1-D Gaussian taps for radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Separable Gaussian blur with clamp-to-edge borders. `sigma == 0` is the
/// identity.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(ImageError::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h, ch) = (img.width(), img.height(), img.channels());

    let mut tmp = vec![0f32; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0f64;
                for (k, wt) in kernel.iter().enumerate() {
                    let sx = x as isize + k as isize - radius;
                    acc += wt * img.get_clamped(sx, y as isize, c) as f64;
                }
                tmp[(y * w + x) * ch + c] = acc as f32;
            }
        }
    }
    let horiz = Image::new(w, h, ch, tmp)?;

    let mut out = vec![0f32; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0f64;
                for (k, wt) in kernel.iter().enumerate() {
                    let sy = y as isize + k as isize - radius;
                    acc += wt * horiz.get_clamped(x as isize, sy, c) as f64;
                }
                out[(y * w + x) * ch + c] = acc as f32;
            }
        }
    }
    Image::new(w, h, ch, out)
}

/// Sobel gradient magnitude of a gray image, clamp-to-edge.
pub fn gradient_magnitude(img: &Image) -> Result<FloatMap> {
    if img.channels() != 1 {
        return Err(ImageError::Channels {
            expected: 1,
            got: img.channels(),
        });
    }
    let (w, h) = img.dims();
    let p = |x: isize, y: isize| img.get_clamped(x, y, 0) as f64;
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (p(x + 1, y - 1) + 2.0 * p(x + 1, y) + p(x + 1, y + 1))
                - (p(x - 1, y - 1) + 2.0 * p(x - 1, y) + p(x - 1, y + 1));
            let gy = (p(x - 1, y + 1) + 2.0 * p(x, y + 1) + p(x + 1, y + 1))
                - (p(x - 1, y - 1) + 2.0 * p(x, y - 1) + p(x + 1, y - 1));
            values.push((gx * gx + gy * gy).sqrt());
        }
    }
    FloatMap::new(w, h, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize) -> Image {
        Image::from_fn_gray(w, h, |x, y| {
            (((x * 37 + y * 91) % 53) as f32 / 53.0) * 0.6 + 0.2
        })
        .unwrap()
    }

    #[test]
    fn sigma_zero_is_identity() {
        let img = textured(12, 9);
        assert_eq!(gaussian_blur(&img, 0.0).unwrap(), img);
    }

    #[test]
    fn negative_sigma_rejected() {
        let img = textured(4, 4);
        assert!(matches!(
            gaussian_blur(&img, -0.5),
            Err(ImageError::NegativeSigma(_))
        ));
    }

    #[test]
    fn constant_survives_blur() {
        let img = Image::filled(10, 7, 3, 0.37).unwrap();
        let out = gaussian_blur(&img, 2.3).unwrap();
        for &v in out.data() {
            assert!((v - 0.37).abs() < 1e-6);
        }
    }

    #[test]
    fn impulse_center_matches_independent_kernel() {
        // Independent oracle: evaluate the 2-D normalized Gaussian directly.
        let sigma = 1.0f64;
        let r = 3i32;
        let norm: f64 = (-r..=r)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .sum();
        let center_2d = 1.0 / (norm * norm);

        let mut img = Image::filled(9, 9, 1, 0.0).unwrap();
        img.set(4, 4, 0, 1.0);
        let out = gaussian_blur(&img, sigma).unwrap();
        assert!((out.get(4, 4, 0) as f64 - center_2d).abs() < 1e-6);
        let off = (-0.5f64).exp() / (norm * norm);
        assert!((out.get(5, 4, 0) as f64 - off).abs() < 1e-6);
    }

    #[test]
    fn blur_roughly_preserves_global_mean() {
        let img = textured(64, 48);
        let out = gaussian_blur(&img, 2.0).unwrap();
        assert!((img.mean() - out.mean()).abs() < 1e-3);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let img = Image::filled(6, 6, 1, 0.4).unwrap();
        assert!(gradient_magnitude(&img)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn step_edge_responds_only_at_edge() {
        let img = Image::from_fn_gray(10, 5, |x, _| if x < 5 { 0.0 } else { 1.0 }).unwrap();
        let g = gradient_magnitude(&img).unwrap();
        for y in 0..5 {
            assert!((g.get(4, y) - 4.0).abs() < 1e-9);
            assert!((g.get(5, y) - 4.0).abs() < 1e-9);
            assert_eq!(g.get(0, y), 0.0);
            assert_eq!(g.get(9, y), 0.0);
        }
    }

    #[test]
    fn ramp_has_uniform_interior_magnitude() {
        // Sobel on f(x) = x / W: gx = (1 + 2 + 1) * 2 / W, gy = 0.
        let w = 32;
        let img = Image::from_fn_gray(w, 8, |x, _| x as f32 / w as f32).unwrap();
        let g = gradient_magnitude(&img).unwrap();
        let expected = 8.0 / w as f64;
        for y in 0..8 {
            for x in 1..w - 1 {
                assert!((g.get(x, y) - expected).abs() < 1e-6, "({x},{y})");
            }
        }
    }

    #[test]
    fn gradient_requires_gray() {
        let img = Image::filled(3, 3, 3, 0.0).unwrap();
        assert!(matches!(
            gradient_magnitude(&img),
            Err(ImageError::Channels {
                expected: 1,
                got: 3
            })
        ));
    }
}
