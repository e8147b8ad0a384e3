//! Checks that degradation variance concentrates where the clean image has
//! strong gradients.

use serde::{Deserialize, Serialize};

use crate::imgcore::{gradient_magnitude, to_grayscale, FloatMap, Image};

use super::{DegradeError, Result};

/// Default number of degraded variants per validation run.
pub const DEFAULT_VARIANTS: usize = 10;

/// Total variance below which correlation is reported as undefined.
pub const DEGENERATE_VARIANCE: f64 = 1e-8;

/// Per-pixel population variance of the luma across `variants`.
pub fn variance_map(variants: &[Image]) -> Result<FloatMap> {
    if variants.len() < 2 {
        return Err(DegradeError::TooFewVariants(variants.len()));
    }
    let dims = variants[0].dims();
    if let Some(v) = variants.iter().find(|v| v.dims() != dims) {
        return Err(DegradeError::DimMismatch {
            expected: dims,
            got: v.dims(),
        });
    }
    let grays: Vec<Image> = variants.iter().map(to_grayscale).collect();
    let n = grays.len() as f64;
    let len = dims.0 * dims.1;
    let mut out = vec![0.0; len];
    for (i, o) in out.iter_mut().enumerate() {
        let mean = grays.iter().map(|g| g.data()[i] as f64).sum::<f64>() / n;
        *o = grays
            .iter()
            .map(|g| (g.data()[i] as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
    }
    Ok(FloatMap::new(dims.0, dims.1, out)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Pearson correlation of the variance map with the clean gradient map.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson_r: Option<f64>,
    /// Mean variance over top-decile gradient pixels divided by the mean over
    /// the bottom decile.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi_lo_ratio: Option<f64>,
    pub degenerate: bool,
    pub total_variance: f64,
    pub n_variants: usize,
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    let den = (saa * sbb).sqrt();
    (den > 0.0).then(|| sab / den)
}

pub fn validate_degradation(clean: &Image, variants: &[Image]) -> Result<ValidationReport> {
    let var = variance_map(variants)?;
    if var.width() != clean.width() || var.height() != clean.height() {
        return Err(DegradeError::DimMismatch {
            expected: clean.dims(),
            got: (var.width(), var.height()),
        });
    }
    let grad = gradient_magnitude(&to_grayscale(clean))?;
    let total_variance: f64 = var.values().iter().sum();
    let mut report = ValidationReport {
        pearson_r: None,
        hi_lo_ratio: None,
        degenerate: total_variance < DEGENERATE_VARIANCE,
        total_variance,
        n_variants: variants.len(),
    };
    if report.degenerate {
        return Ok(report);
    }
    report.pearson_r = pearson(var.values(), grad.values());
    let mut order: Vec<usize> = (0..grad.values().len()).collect();
    order.sort_by(|&i, &j| {
        grad.values()[i]
            .total_cmp(&grad.values()[j])
            .then(i.cmp(&j))
    });
    let k = (order.len() / 10).max(1);
    let mean_of =
        |idx: &[usize]| idx.iter().map(|&i| var.values()[i]).sum::<f64>() / idx.len() as f64;
    let lo = mean_of(&order[..k]);
    let hi = mean_of(&order[order.len() - k..]);
    report.hi_lo_ratio = Some(hi / lo.max(1e-12));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_variants_zero_and_degenerate() {
        let img = crate::synth::detail_fixture(32, 32, 1);
        let v = vec![img.clone(); 10];
        assert!(variance_map(&v).unwrap().values().iter().all(|&x| x == 0.0));
        let r = validate_degradation(&img, &v).unwrap();
        assert!(r.degenerate);
        assert!(r.pearson_r.is_none() && r.hi_lo_ratio.is_none());
        let json = serde_json::to_string(&r).unwrap();
        assert!(!json.contains("pearson_r"));
    }

    #[test]
    fn two_point_variance() {
        let a = Image::filled(4, 3, 1, 0.25).unwrap();
        let mut b = a.clone();
        b.set(2, 1, 0, 0.75);
        let m = variance_map(&[a, b]).unwrap();
        for y in 0..3 {
            for x in 0..4 {
                let expect = if (x, y) == (2, 1) { 0.25 * 0.25 } else { 0.0 };
                assert!((m.get(x, y) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn input_errors() {
        let a = Image::filled(4, 3, 1, 0.0).unwrap();
        assert!(matches!(
            variance_map(std::slice::from_ref(&a)),
            Err(DegradeError::TooFewVariants(1))
        ));
        let b = Image::filled(3, 3, 1, 0.0).unwrap();
        assert!(matches!(
            variance_map(&[a, b]),
            Err(DegradeError::DimMismatch { .. })
        ));
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
