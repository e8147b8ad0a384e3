//! Discrete Poisson system on a rectangle with Dirichlet boundary, solved by
//! Jacobi-preconditioned conjugate gradient.

use rayon::prelude::*;

use super::{BlendError, Result};

/// 5-point Laplacian system over a `width x height` grid of unknowns.
///
/// Unknown `k = y * width + x` sits at `(x + 1, y + 1)` of a frame that is
/// one pixel larger on every side; the frame's outer ring holds the known
/// boundary values. For each channel the right-hand side is the guidance
/// divergence plus the boundary values of ring neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    width: usize,
    height: usize,
    rhs: Vec<Vec<f64>>,
    initial: Option<Vec<Vec<f64>>>,
}

impl LinearSystem {
    /// `frames[c]` has `(width + 2) * (height + 2)` values of which only the
    /// outer ring is read; `guidance[c]` has `width * height` values, the sum
    /// over the 4 neighbours `q` of the guidance difference `v_pq`.
    pub fn new(
        width: usize,
        height: usize,
        frames: &[Vec<f64>],
        guidance: &[Vec<f64>],
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(BlendError::EmptySystem);
        }
        if frames.len() != guidance.len() || frames.is_empty() {
            return Err(BlendError::System(
                "one frame and one guidance field per channel".into(),
            ));
        }
        let fw = width + 2;
        let n = width * height;
        let mut rhs = Vec::with_capacity(frames.len());
        for (frame, g) in frames.iter().zip(guidance) {
            if frame.len() != fw * (height + 2) || g.len() != n {
                return Err(BlendError::System(format!(
                    "frame {} (want {}), guidance {} (want {n})",
                    frame.len(),
                    fw * (height + 2),
                    g.len()
                )));
            }
            let mut b = g.clone();
            for y in 0..height {
                for x in 0..width {
                    let fx = x + 1;
                    let fy = y + 1;
                    let k = y * width + x;
                    if x == 0 {
                        b[k] += frame[fy * fw + fx - 1];
                    }
                    if x + 1 == width {
                        b[k] += frame[fy * fw + fx + 1];
                    }
                    if y == 0 {
                        b[k] += frame[(fy - 1) * fw + fx];
                    }
                    if y + 1 == height {
                        b[k] += frame[(fy + 1) * fw + fx];
                    }
                }
            }
            rhs.push(b);
        }
        Ok(Self {
            width,
            height,
            rhs,
            initial: None,
        })
    }

    /// Starting point for CG, one vector per channel.
    pub fn with_initial_guess(mut self, x0: Vec<Vec<f64>>) -> Result<Self> {
        if x0.len() != self.rhs.len() || x0.iter().any(|v| v.len() != self.unknowns()) {
            return Err(BlendError::System("initial guess shape".into()));
        }
        self.initial = Some(x0);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn unknowns(&self) -> usize {
        self.width * self.height
    }

    pub fn channels(&self) -> usize {
        self.rhs.len()
    }

    pub fn rhs(&self, channel: usize) -> &[f64] {
        &self.rhs[channel]
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn pixel(&self, k: usize) -> (usize, usize) {
        (k % self.width, k / self.width)
    }

    /// `out = A v` with `A = 4 I - (interior neighbour adjacency)`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let w = self.width;
        for y in 0..self.height {
            for x in 0..w {
                let k = y * w + x;
                let mut s = 4.0 * v[k];
                if x > 0 {
                    s -= v[k - 1];
                }
                if x + 1 < w {
                    s -= v[k + 1];
                }
                if y > 0 {
                    s -= v[k - w];
                }
                if y + 1 < self.height {
                    s -= v[k + w];
                }
                out[k] = s;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Relative residual `|r| / |b|` at which CG stops.
    pub tol: f64,
    /// `None` means 10 x the number of unknowns.
    pub max_iters: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoissonSolution {
    pub values: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn solve_channel(
    sys: &LinearSystem,
    c: usize,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = sys.unknowns();
    let b = &sys.rhs[c];
    let max_iters = cfg.max_iters.unwrap_or(10 * n);
    let b_norm = dot(b, b).sqrt();
    let mut x = match &sys.initial {
        Some(x0) => x0[c].clone(),
        None => vec![0.0; n],
    };
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }
    let mut ax = vec![0.0; n];
    sys.apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    // Every row of A has diagonal 4.
    let inv_diag = 0.25;
    let mut z: Vec<f64> = r.iter().map(|v| v * inv_diag).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    let mut it = 0;
    while rel > cfg.tol {
        if it >= max_iters {
            return Err(BlendError::NotConverged {
                iterations: it,
                residual: rel,
            });
        }
        sys.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(BlendError::NotConverged {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        rel = dot(&r, &r).sqrt() / b_norm;
    }
    Ok((x, it, rel))
}

/// Solves every channel independently (in parallel).
pub fn solve_poisson(sys: &LinearSystem, cfg: &SolverConfig) -> Result<PoissonSolution> {
    let per: Vec<(Vec<f64>, usize, f64)> = (0..sys.channels())
        .into_par_iter()
        .map(|c| solve_channel(sys, c, cfg))
        .collect::<Result<_>>()?;
    let mut out = PoissonSolution {
        values: Vec::with_capacity(per.len()),
        iterations: Vec::with_capacity(per.len()),
        residuals: Vec::with_capacity(per.len()),
    };
    for (v, it, r) in per {
        out.values.push(v);
        out.iterations.push(it);
        out.residuals.push(r);
    }
    Ok(out)
}
