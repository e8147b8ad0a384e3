//! Brute-force Hamming matching: mutual nearest neighbours with a ratio test.

use crate::keypoints::Descriptor;

use super::{Match, MatchError, Result};

struct Nearest {
    idx: usize,
    best: u32,
    /// Second-smallest distance over the other candidates; `None` when the
    /// candidate side holds a single descriptor.
    second: Option<u32>,
}

fn nearest(query: &Descriptor, candidates: &[Descriptor]) -> Option<Nearest> {
    let mut out: Option<Nearest> = None;
    for (j, c) in candidates.iter().enumerate() {
        let d = query.hamming(c);
        match &mut out {
            None => {
                out = Some(Nearest {
                    idx: j,
                    best: d,
                    second: None,
                })
            }
            Some(n) => {
                if d < n.best {
                    n.second = Some(n.best);
                    n.best = d;
                    n.idx = j;
                } else if n.second.is_none_or(|s| d < s) {
                    n.second = Some(d);
                }
            }
        }
    }
    out
}

/// Mutual nearest neighbours without the ratio test, ordered by `idx_a`.
/// Ties resolve to the lowest index.
pub fn mutual_nearest(a: &[Descriptor], b: &[Descriptor]) -> Vec<Match> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let back: Vec<usize> = b
        .iter()
        .map(|d| nearest(d, a).expect("a is non-empty").idx)
        .collect();
    a.iter()
        .enumerate()
        .filter_map(|(i, d)| {
            let n = nearest(d, b)?;
            (back[n.idx] == i).then_some(Match {
                idx_a: i,
                idx_b: n.idx,
                distance: n.best,
            })
        })
        .collect()
}

/// Mutual nearest neighbours that also pass `best < ratio * second_best`,
/// where both distances are taken over the query's own candidates in `b`.
pub fn match_descriptors(a: &[Descriptor], b: &[Descriptor], ratio: f64) -> Result<Vec<Match>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(MatchError::InvalidRatio(ratio));
    }
    if a.is_empty() || b.is_empty() {
        return Ok(Vec::new());
    }
    let back: Vec<usize> = b
        .iter()
        .map(|d| nearest(d, a).expect("a is non-empty").idx)
        .collect();
    Ok(a.iter()
        .enumerate()
        .filter_map(|(i, d)| {
            let n = nearest(d, b)?;
            if back[n.idx] != i {
                return None;
            }
            let passes = match n.second {
                None => true,
                Some(s) => (n.best as f64) < ratio * s as f64,
            };
            passes.then_some(Match {
                idx_a: i,
                idx_b: n.idx,
                distance: n.best,
            })
        })
        .collect())
}
