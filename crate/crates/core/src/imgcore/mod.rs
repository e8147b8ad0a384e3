//! Raster container, PNG/JPEG I/O, resampling and the elementary filters the
//! rest of the toolkit is built on.
//!
//! Pixels are held as `f32` samples in `[0, 1]`; 8-bit values only exist at
//! the I/O boundary. Every filter uses clamp-to-edge borders.

mod filter;
mod io;
mod resample;
mod warp;

pub use filter::{gaussian_blur, gaussian_kernel, gradient_magnitude};
pub use io::{load_image, save_image};
pub use resample::resize;
pub use warp::{rotate_about_center, sample_bilinear, warp_into};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("corrupt image stream in {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("cannot write {path}: {reason}")]
    Write { path: String, reason: String },
    #[error("invalid dimensions {width}x{height}x{channels}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("pixel buffer has {got} samples, expected {expected}")]
    BufferLength { expected: usize, got: usize },
    #[error("expected a {expected}-channel image, got {got}")]
    Channels { expected: usize, got: usize },
    #[error("gaussian sigma must be >= 0, got {0}")]
    NegativeSigma(f64),
    #[error("resize target must be at least 1x1, got {0}x{1}")]
    ZeroTarget(usize, usize),
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

pub type Result<T> = std::result::Result<T, ImageError>;

/// Row-major raster with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height, channels)?;
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImageError::BufferLength {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        check_dims(width, height, channels)?;
        Ok(Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        })
    }

    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
        Self::new(width, height, channels, data)
    }

    /// Builds a gray image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn_gray(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> f32,
    ) -> Result<Self> {
        check_dims(width, height, 1)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            channels: 1,
            data,
        })
    }

    /// Quantizes to 8 bits, clamping to `[0, 1]` and rounding half-up.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    /// Snaps every sample to the nearest 8-bit level, as a save/load cycle would.
    pub fn quantized(&self) -> Image {
        Image {
            data: self
                .data
                .iter()
                .map(|&v| quantize(v) as f32 / 255.0)
                .collect(),
            ..self.clone()
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let w = self.width;
        let ch = self.channels;
        self.data[(y * w + x) * ch + c] = v;
    }

    /// Sample at signed coordinates with clamp-to-edge.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> f32 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc, c)
    }

    /// Extracts one channel as a gray image.
    pub fn channel(&self, c: usize) -> Image {
        let data = self
            .data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Interleaves gray planes of equal size into one image.
    pub fn from_channels(planes: &[Image]) -> Result<Image> {
        let first = planes.first().ok_or(ImageError::InvalidDimensions {
            width: 0,
            height: 0,
            channels: 0,
        })?;
        let (w, h) = first.dims();
        let n = planes.len();
        check_dims(w, h, n)?;
        for p in planes {
            if p.dims() != (w, h) {
                return Err(ImageError::DimensionMismatch(w, h, p.width, p.height));
            }
            if p.channels != 1 {
                return Err(ImageError::Channels {
                    expected: 1,
                    got: p.channels,
                });
            }
        }
        let mut data = Vec::with_capacity(w * h * n);
        for i in 0..w * h {
            for p in planes {
                data.push(p.data[i]);
            }
        }
        Ok(Image {
            width: w,
            height: h,
            channels: n,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Image {
        Image {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn clamped(&self) -> Image {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// ITU-R BT.601 luma. Gray input is returned unchanged.
    pub fn to_grayscale(&self) -> Image {
        to_grayscale(self)
    }
}

/// ITU-R BT.601 luma (`0.299 R + 0.587 G + 0.114 B`); gray input is returned
/// unchanged.
pub fn to_grayscale(img: &Image) -> Image {
    if img.channels == 1 {
        return img.clone();
    }
    let data = img
        .data
        .chunks_exact(img.channels)
        .map(|px| (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64) as f32)
        .collect();
    Image {
        width: img.width,
        height: img.height,
        channels: 1,
        data,
    }
}

#[inline]
fn quantize(v: f32) -> u8 {
    // f64 so that values like 76.245 round as written, not as f32 happens to store them.
    (v.clamp(0.0, 1.0) as f64 * 255.0 + 0.5).floor() as u8
}

fn check_dims(width: usize, height: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
        return Err(ImageError::InvalidDimensions {
            width,
            height,
            channels,
        });
    }
    Ok(())
}

/// One float per pixel, unbounded. Gradient magnitudes and variance maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl FloatMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions {
                width,
                height,
                channels: 1,
            });
        }
        if values.len() != width * height {
            return Err(ImageError::BufferLength {
                expected: width * height,
                got: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the largest value; first occurrence wins.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }
}
