use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest inertia wins.
    pub n_init: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams { k: 2, seed: 0, max_iter: 300, tol: 1e-6, n_init: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centers: Matrix,
    pub inertia: f64,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center (lowest index on ties) and its squared distance.
fn nearest(x: &[f64], centers: &Matrix) -> (usize, f64) {
    (0..centers.rows())
        .map(|c| (c, dist2(x, centers.row(c))))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
fn init_centers(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let m = x.rows();
    let mut centers = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..m);
    centers.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = (0..m).map(|i| dist2(x.row(i), x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = m - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // Rounding may run past the end; take the last point with weight.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..m)
        };
        centers.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(x.row(i), x.row(pick)));
        }
    }
    centers
}

/// Lloyd iterations from k-means++ seeding, stopping once no center moves by
/// `tol` or more. Empty clusters are re-seeded at the point farthest from
/// its assigned center. Restart `r` draws from stream `r` of the seed.
pub fn kmeans(x: &Matrix, params: &KMeansParams) -> Result<KMeansResult> {
    let m = x.rows();
    let k = params.k;
    if k == 0 || k > m {
        return Err(Error::Parameter(format!("k must lie in [1, {m}], got {k}")));
    }
    if params.n_init == 0 {
        return Err(Error::Parameter("n_init must be at least 1".into()));
    }
    if let Some((row, col, value)) = x.find_non_finite() {
        return Err(Error::NonFinite { row, col, value });
    }
    let mut best: Option<KMeansResult> = None;
    for run in 0..params.n_init {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(run as u64);
        let r = lloyd(x, params, &mut rng);
        if best.as_ref().is_none_or(|b| r.inertia < b.inertia) {
            best = Some(r);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn lloyd(x: &Matrix, params: &KMeansParams, rng: &mut ChaCha8Rng) -> KMeansResult {
    let m = x.rows();
    let k = params.k;
    let mut centers = init_centers(x, k, rng);
    let mut assignments = vec![0usize; m];
    let mut distances = vec![0.0f64; m];
    let mut iterations = 0;
    for it in 0..params.max_iter.max(1) {
        iterations = it + 1;
        let assigned: Vec<(usize, f64)> = (0..m).into_par_iter().map(|i| nearest(x.row(i), &centers)).collect();
        for (i, (c, d)) in assigned.into_iter().enumerate() {
            assignments[i] = c;
            distances[i] = d;
        }
        let mut sums = Matrix::zeros(k, x.cols());
        let mut counts = vec![0usize; k];
        for i in 0..m {
            counts[assignments[i]] += 1;
            sums.row_mut(assignments[i]).iter_mut().zip(x.row(i)).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..m)
                    .filter(|&i| counts[assignments[i]] > 1)
                    .max_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    let old = assignments[i];
                    counts[old] -= 1;
                    sums.row_mut(old).iter_mut().zip(x.row(i)).for_each(|(s, v)| *s -= v);
                    assignments[i] = c;
                    distances[i] = 0.0;
                    counts[c] = 1;
                    sums.row_mut(c).copy_from_slice(x.row(i));
                }
            }
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let new: Vec<f64> = sums.row(c).iter().map(|s| s * inv).collect();
            shift = shift.max(dist2(&new, centers.row(c)).sqrt());
            centers.row_mut(c).copy_from_slice(&new);
        }
        if shift < params.tol {
            break;
        }
    }
    let final_assign: Vec<(usize, f64)> = (0..m).into_par_iter().map(|i| nearest(x.row(i), &centers)).collect();
    let assignments: Vec<usize> = final_assign.iter().map(|p| p.0).collect();
    let inertia = final_assign.iter().map(|p| p.1).sum();
    KMeansResult { assignments, centers, inertia, iterations }
}
