//! Affine (least squares) and homography (normalized DLT) estimation.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{MatchError, Result};

/// A point correspondence `(a, b)` with `b ~ model(a)`.
pub type PointPair = ([f64; 2], [f64; 2]);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Affine,
    Homography,
}

impl ModelKind {
    pub fn min_samples(self) -> usize {
        match self {
            ModelKind::Affine => 3,
            ModelKind::Homography => 4,
        }
    }
}

/// Geometric model mapping image-a coordinates to image-b coordinates.
///
/// Affine coefficients are `[a, b, tx, c, d, ty]`; homography coefficients are
/// the 9 row-major entries, scaled so `h33 = 1` whenever `|h33| > 1e-12`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeomModel {
    pub kind: ModelKind,
    pub coefficients: Vec<f64>,
}

const SINGULAR_EPS: f64 = 1e-12;

impl GeomModel {
    pub fn identity(kind: ModelKind) -> Self {
        Self::from_matrix(kind, &Matrix3::identity()).expect("identity is regular")
    }

    /// Validates and normalizes a 3x3 matrix into a model of `kind`.
    pub fn from_matrix(kind: ModelKind, m: &Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(MatchError::Degenerate(
                "non-finite model coefficients".into(),
            ));
        }
        let m = match kind {
            ModelKind::Homography if m[(2, 2)].abs() > SINGULAR_EPS => m / m[(2, 2)],
            _ => *m,
        };
        if m.determinant().abs() <= SINGULAR_EPS {
            return Err(MatchError::Degenerate("singular model".into()));
        }
        let coefficients = match kind {
            ModelKind::Affine => vec![
                m[(0, 0)],
                m[(0, 1)],
                m[(0, 2)],
                m[(1, 0)],
                m[(1, 1)],
                m[(1, 2)],
            ],
            ModelKind::Homography => m.transpose().iter().copied().collect(),
        };
        Ok(Self { kind, coefficients })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let c = &self.coefficients;
        match self.kind {
            ModelKind::Affine => Matrix3::new(c[0], c[1], c[2], c[3], c[4], c[5], 0.0, 0.0, 1.0),
            ModelKind::Homography => {
                Matrix3::new(c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8])
            }
        }
    }

    pub fn apply(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        project(&self.matrix(), p)
    }

    pub fn inverse(&self) -> Option<GeomModel> {
        let inv = self.matrix().try_inverse()?;
        GeomModel::from_matrix(self.kind, &inv).ok()
    }

    /// Checks the stated invariants (coefficient count, finiteness, regularity).
    pub fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            ModelKind::Affine => 6,
            ModelKind::Homography => 9,
        };
        if self.coefficients.len() != expected {
            return Err(MatchError::Degenerate(format!(
                "{:?} model needs {expected} coefficients, got {}",
                self.kind,
                self.coefficients.len()
            )));
        }
        GeomModel::from_matrix(self.kind, &self.matrix()).map(|_| ())
    }
}

pub fn project(m: &Matrix3<f64>, p: [f64; 2]) -> Option<[f64; 2]> {
    let v = m * Vector3::new(p[0], p[1], 1.0);
    if v[2].abs() < 1e-15 {
        return None;
    }
    let out = [v[0] / v[2], v[1] / v[2]];
    out.iter().all(|x| x.is_finite()).then_some(out)
}

/// Fits a model to all `pairs`: affine by linear least squares, homography by
/// Hartley-normalized DLT.
pub fn estimate_model(pairs: &[PointPair], kind: ModelKind) -> Result<GeomModel> {
    let need = kind.min_samples();
    if pairs.len() < need {
        return Err(MatchError::InsufficientPairs {
            needed: need,
            got: pairs.len(),
        });
    }
    if pairs
        .iter()
        .any(|(a, b)| !(a.iter().chain(b.iter()).all(|v| v.is_finite())))
    {
        return Err(MatchError::Degenerate("non-finite coordinates".into()));
    }
    let src: Vec<[f64; 2]> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<[f64; 2]> = pairs.iter().map(|p| p.1).collect();
    check_configuration(&src, kind)?;
    check_configuration(&dst, kind)?;
    match kind {
        ModelKind::Affine => fit_affine(&src, &dst),
        ModelKind::Homography => fit_homography(&src, &dst),
    }
}

/// Rejects configurations that cannot determine a model: all points
/// collinear, or (for a minimal homography sample) any collinear triple.
fn check_configuration(pts: &[[f64; 2]], kind: ModelKind) -> Result<()> {
    let (_, norm) = normalize_points(pts);
    let area = |i: usize, j: usize, k: usize| {
        let (a, b, c) = (norm[i], norm[j], norm[k]);
        ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs() / 2.0
    };
    const MIN_AREA: f64 = 1e-6;
    let n = norm.len();
    if kind == ModelKind::Homography && n == 4 {
        for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
            if area(i, j, k) < MIN_AREA {
                return Err(MatchError::Degenerate(
                    "three collinear points in minimal sample".into(),
                ));
            }
        }
        return Ok(());
    }
    // Spread check: second moment matrix must have two non-trivial axes.
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in &norm {
        sxx += p[0] * p[0];
        sxy += p[0] * p[1];
        syy += p[1] * p[1];
    }
    let (sxx, sxy, syy) = (sxx / n as f64, sxy / n as f64, syy / n as f64);
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let minor = tr / 2.0 - disc;
    if minor < MIN_AREA {
        return Err(MatchError::Degenerate("points are collinear".into()));
    }
    Ok(())
}

/// Translate to the centroid and scale so the mean distance is sqrt(2).
pub(crate) fn normalize_points(pts: &[[f64; 2]]) -> (Matrix3<f64>, Vec<[f64; 2]>) {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean_dist = pts
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 1e-15 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let out = pts
        .iter()
        .map(|p| [s * (p[0] - cx), s * (p[1] - cy)])
        .collect();
    (t, out)
}

fn fit_affine(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<GeomModel> {
    let (ts, sn) = normalize_points(src);
    let (td, dn) = normalize_points(dst);
    let n = sn.len();
    let design = DMatrix::from_fn(n, 3, |r, c| match c {
        0 => sn[r][0],
        1 => sn[r][1],
        _ => 1.0,
    });
    let svd = design.svd(true, true);
    let bx = DVector::from_iterator(n, dn.iter().map(|p| p[0]));
    let by = DVector::from_iterator(n, dn.iter().map(|p| p[1]));
    let rx = svd
        .solve(&bx, 1e-12)
        .map_err(|e| MatchError::Degenerate(format!("affine solve: {e}")))?;
    let ry = svd
        .solve(&by, 1e-12)
        .map_err(|e| MatchError::Degenerate(format!("affine solve: {e}")))?;
    let norm = Matrix3::new(rx[0], rx[1], rx[2], ry[0], ry[1], ry[2], 0.0, 0.0, 1.0);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| MatchError::Degenerate("normalization not invertible".into()))?;
    GeomModel::from_matrix(ModelKind::Affine, &(td_inv * norm * ts))
}

fn fit_homography(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<GeomModel> {
    let (ts, sn) = normalize_points(src);
    let (td, dn) = normalize_points(dst);
    let n = sn.len();
    // At least 9 rows so the SVD exposes the full right null space.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for i in 0..n {
        let [sx, sy] = sn[i];
        let [dx, dy] = dn[i];
        let r = 2 * i;
        a[(r, 3)] = -sx;
        a[(r, 4)] = -sy;
        a[(r, 5)] = -1.0;
        a[(r, 6)] = dy * sx;
        a[(r, 7)] = dy * sy;
        a[(r, 8)] = dy;
        a[(r + 1, 0)] = sx;
        a[(r + 1, 1)] = sy;
        a[(r + 1, 2)] = 1.0;
        a[(r + 1, 6)] = -dx * sx;
        a[(r + 1, 7)] = -dx * sy;
        a[(r + 1, 8)] = -dx;
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| MatchError::Degenerate("SVD failed".into()))?;
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("9 singular values");
    let h = v_t.row(min_idx);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| MatchError::Degenerate("normalization not invertible".into()))?;
    GeomModel::from_matrix(ModelKind::Homography, &(td_inv * hn * ts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn apply(m: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
        project(m, p).unwrap()
    }

    #[test]
    fn exact_affine_recovery() {
        let truth = Matrix3::new(1.1, -0.2, 13.0, 0.15, 0.9, -7.5, 0.0, 0.0, 1.0);
        let pts = [
            [0.0, 0.0],
            [100.0, 5.0],
            [20.0, 80.0],
            [55.0, 41.0],
            [300.0, 200.0],
        ];
        let pairs: Vec<PointPair> = pts.iter().map(|&p| (p, apply(&truth, p))).collect();
        let m = estimate_model(&pairs, ModelKind::Affine).unwrap();
        let expect = [1.1, -0.2, 13.0, 0.15, 0.9, -7.5];
        for (a, b) in m.coefficients.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn unit_square_identity_homography() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let pairs: Vec<PointPair> = sq.iter().map(|&p| (p, p)).collect();
        let m = estimate_model(&pairs, ModelKind::Homography).unwrap();
        let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        for (a, b) in m.coefficients.iter().zip(id) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn noisy_homography_reprojection_rms_below_one_px() {
        let truth = Matrix3::new(0.95, 0.12, 30.0, -0.08, 1.05, 12.0, 2e-4, -1e-4, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let pairs: Vec<PointPair> = (0..50)
            .map(|_| {
                let p = [rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0)];
                let q = apply(&truth, p);
                (
                    p,
                    [q[0] + noise.sample(&mut rng), q[1] + noise.sample(&mut rng)],
                )
            })
            .collect();
        let m = estimate_model(&pairs, ModelKind::Homography).unwrap();
        let rms = (pairs
            .iter()
            .map(|(p, _)| {
                let a = m.apply(*p).unwrap();
                let b = apply(&truth, *p);
                (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
            })
            .sum::<f64>()
            / pairs.len() as f64)
            .sqrt();
        assert!(rms < 1.0, "rms {rms}");
    }

    #[test]
    fn insufficient_and_degenerate_rejected() {
        let two = [([0.0, 0.0], [0.0, 0.0]), ([1.0, 0.0], [1.0, 0.0])];
        assert!(matches!(
            estimate_model(&two, ModelKind::Affine),
            Err(MatchError::InsufficientPairs { needed: 3, got: 2 })
        ));
        let line: Vec<PointPair> = (0..5)
            .map(|i| ([i as f64, 2.0 * i as f64], [i as f64, i as f64]))
            .collect();
        assert!(matches!(
            estimate_model(&line, ModelKind::Affine),
            Err(MatchError::Degenerate(_))
        ));
        let three_collinear = [
            ([0.0, 0.0], [0.0, 0.0]),
            ([1.0, 0.0], [1.0, 0.0]),
            ([2.0, 0.0], [2.0, 0.0]),
            ([0.0, 1.0], [0.0, 1.0]),
        ];
        assert!(matches!(
            estimate_model(&three_collinear, ModelKind::Homography),
            Err(MatchError::Degenerate(_))
        ));
    }

    #[test]
    fn inverse_composes_to_identity() {
        let m = GeomModel::from_matrix(
            ModelKind::Homography,
            &Matrix3::new(1.2, 0.1, 5.0, -0.1, 0.8, 3.0, 1e-4, 2e-4, 1.0),
        )
        .unwrap();
        let inv = m.inverse().unwrap();
        let p = [37.0, 81.0];
        let back = inv.apply(m.apply(p).unwrap()).unwrap();
        assert!((back[0] - p[0]).abs() < 1e-9 && (back[1] - p[1]).abs() < 1e-9);
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = Matrix3::new(1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 1.0);
        assert!(GeomModel::from_matrix(ModelKind::Affine, &m).is_err());
    }
}
