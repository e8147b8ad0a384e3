//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use fidelkit::cropblend::LinearSystem;

/// Dense Gaussian elimination with partial pivoting on the 5-point
/// Laplacian of `sys`, built entry by entry from the grid definition.
pub fn dense_poisson_solve(sys: &LinearSystem, channel: usize) -> Vec<f64> {
    let (w, h) = (sys.width(), sys.height());
    let n = w * h;
    let mut a = vec![vec![0.0f64; n + 1]; n];
    for y in 0..h {
        for x in 0..w {
            let k = y * w + x;
            a[k][k] = 4.0;
            for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    a[k][ny as usize * w + nx as usize] = -1.0;
                }
            }
            a[k][n] = sys.rhs(channel)[k];
        }
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let pivot = a[col].clone();
        for row in a.iter_mut().skip(col + 1) {
            let f = row[col] / pivot[col];
            if f != 0.0 {
                for (dst, src) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *dst -= f * src;
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][n] - s) / a[row][row];
    }
    x
}

/// Literal transcription of the improvement indicator average.
pub fn brute_k_gain(akis: &[i64], tau: i64) -> f64 {
    let mut improved = 0u64;
    for &a in akis {
        if a > tau {
            improved += 1;
        }
    }
    improved as f64 / akis.len() as f64
}

/// Random Poisson system: random boundary frame and guidance.
pub fn random_system(w: usize, h: usize, seed: u64) -> LinearSystem {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let frame: Vec<f64> = (0..(w + 2) * (h + 2))
        .map(|_| rng.gen_range(0.0..1.0))
        .collect();
    let guidance: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-0.5..0.5)).collect();
    LinearSystem::new(w, h, &[frame], &[guidance]).unwrap()
}
