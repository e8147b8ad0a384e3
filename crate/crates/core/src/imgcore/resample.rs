use super::{Image, ImageError, Result};

/// Per-output-sample source taps along one axis.
type Taps = Vec<Vec<(usize, f64)>>;

/// Resamples to exactly `target_w x target_h`. Each axis is handled
/// independently: area averaging when it shrinks, bilinear (pixel-center
/// aligned, clamped) when it grows, and a plain copy when it is unchanged.
pub fn resize(img: &Image, target_w: usize, target_h: usize) -> Result<Image> {
    if target_w == 0 || target_h == 0 {
        return Err(ImageError::ZeroTarget(target_w, target_h));
    }
    if (target_w, target_h) == img.dims() {
        return Ok(img.clone());
    }
    let ch = img.channels();
    let (w, h) = img.dims();
    let xt = axis_taps(w, target_w);
    let yt = axis_taps(h, target_h);

    let mut horiz = vec![0f64; target_w * h * ch];
    for y in 0..h {
        for (ox, taps) in xt.iter().enumerate() {
            for c in 0..ch {
                let acc: f64 = taps
                    .iter()
                    .map(|&(sx, wt)| wt * img.get(sx, y, c) as f64)
                    .sum();
                horiz[(y * target_w + ox) * ch + c] = acc;
            }
        }
    }
    let mut out = vec![0f32; target_w * target_h * ch];
    for (oy, taps) in yt.iter().enumerate() {
        for ox in 0..target_w {
            for c in 0..ch {
                let acc: f64 = taps
                    .iter()
                    .map(|&(sy, wt)| wt * horiz[(sy * target_w + ox) * ch + c])
                    .sum();
                out[(oy * target_w + ox) * ch + c] = acc as f32;
            }
        }
    }
    Image::new(target_w, target_h, ch, out)
}

fn axis_taps(src: usize, dst: usize) -> Taps {
    use std::cmp::Ordering;
    match dst.cmp(&src) {
        Ordering::Equal => (0..src).map(|i| vec![(i, 1.0)]).collect(),
        Ordering::Less => area_taps(src, dst),
        Ordering::Greater => bilinear_taps(src, dst),
    }
}

fn area_taps(src: usize, dst: usize) -> Taps {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let lo = i as f64 * scale;
            let hi = (i + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            let mut taps: Vec<(usize, f64)> = (first..last)
                .filter_map(|s| {
                    let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                    (overlap > 0.0).then_some((s, overlap))
                })
                .collect();
            let total: f64 = taps.iter().map(|t| t.1).sum();
            for t in &mut taps {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

fn bilinear_taps(src: usize, dst: usize) -> Taps {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let x0 = pos.floor() as usize;
            let frac = pos - x0 as f64;
            if x0 + 1 >= src || frac == 0.0 {
                vec![(x0, 1.0)]
            } else {
                vec![(x0, 1.0 - frac), (x0 + 1, frac)]
            }
        })
        .collect()
}
