//! KMeans plus the external and internal clustering validity indices used to
//! compare against the sparsity probe, and Pearson/Spearman correlation.

mod indices;
mod kmeans;

use serde::{Deserialize, Serialize};

pub use indices::{
    adjusted_mutual_info, adjusted_rand_index, contingency, entropy, fowlkes_mallows, homogeneity_completeness,
    mutual_info, silhouette, validity_indices, Contingency, ValidityIndices, SILHOUETTE_MAX_SAMPLES,
};
pub use kmeans::{kmeans, KMeansParams, KMeansResult};

use crate::error::Result;
use crate::matrix::Matrix;

/// KMeans run on a feature matrix scored against the true labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub k: usize,
    pub seed: u64,
    #[serde(skip)]
    pub assignments: Vec<usize>,
    pub indices: ValidityIndices,
}

/// Clusters `features` with KMeans and scores the result against `labels`.
pub fn cluster_and_score(features: &Matrix, labels: &[usize], k: usize, seed: u64) -> Result<ClusteringReport> {
    let params = KMeansParams { k, seed, ..Default::default() };
    let result = kmeans(features, &params)?;
    let indices = validity_indices(&result.assignments, labels, Some(features), seed)?;
    Ok(ClusteringReport { k, seed, assignments: result.assignments, indices })
}

/// Sample Pearson correlation; `None` when either input is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Average ranks (ties share the mean rank), 1-based.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` when either input is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    pearson(&ranks(xs), &ranks(ys))
}
