use super::Image;

/// Bilinear sample at continuous pixel coordinates (pixel `i` is centered at
/// `i`), clamp-to-edge outside the raster.
pub fn sample_bilinear(img: &Image, x: f64, y: f64, c: usize) -> f32 {
    let x = x.clamp(0.0, (img.width() - 1) as f64);
    let y = y.clamp(0.0, (img.height() - 1) as f64);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let p00 = img.get_clamped(x0, y0, c) as f64;
    let p10 = img.get_clamped(x0 + 1, y0, c) as f64;
    let p01 = img.get_clamped(x0, y0 + 1, c) as f64;
    let p11 = img.get_clamped(x0 + 1, y0 + 1, c) as f64;
    let top = p00 + (p10 - p00) * fx;
    let bot = p01 + (p11 - p01) * fx;
    (top + (bot - top) * fy) as f32
}

/// Overwrites pixels of `dst` with bilinear samples of `src`.
///
/// `inverse` maps a destination pixel to source coordinates; pixels for which
/// it returns `None`, or whose source position falls outside `src`, are left
/// untouched. Returns the number of pixels written.
pub fn warp_into(
    dst: &mut Image,
    src: &Image,
    inverse: impl Fn(f64, f64) -> Option<(f64, f64)>,
) -> usize {
    let ch = dst.channels().min(src.channels());
    let gray_src = src.channels() == 1;
    let (sw, sh) = (src.width() as f64, src.height() as f64);
    let mut written = 0;
    for y in 0..dst.height() {
        for x in 0..dst.width() {
            let Some((sx, sy)) = inverse(x as f64, y as f64) else {
                continue;
            };
            if !(sx >= -0.5 && sy >= -0.5 && sx <= sw - 0.5 && sy <= sh - 0.5) {
                continue;
            }
            for c in 0..dst.channels() {
                let sc = if gray_src { 0 } else { c.min(ch - 1) };
                dst.set(x, y, c, sample_bilinear(src, sx, sy, sc));
            }
            written += 1;
        }
    }
    written
}

/// Rotates by `degrees` (counter-clockwise on screen) about the image center,
/// keeping the canvas; uncovered corners take clamped border samples.
pub fn rotate_about_center(img: &Image, degrees: f64) -> Image {
    if degrees == 0.0 {
        return img.clone();
    }
    let theta = degrees.to_radians();
    let (s, c) = theta.sin_cos();
    let cx = (img.width() as f64 - 1.0) / 2.0;
    let cy = (img.height() as f64 - 1.0) / 2.0;
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            // Inverse rotation; y points down, so screen-CCW is +theta here.
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = c * dx - s * dy + cx;
            let sy = s * dx + c * dy + cy;
            for ch in 0..img.channels() {
                out.set(x, y, ch, sample_bilinear(img, sx, sy, ch));
            }
        }
    }
    out
}
