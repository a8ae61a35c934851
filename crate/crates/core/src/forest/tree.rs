//! Single variance-minimizing regression tree over one-hot label vectors.

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::forest::{FeatureSubsample, ForestParams};

/// Axis-aligned split: samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// Positions into the owning tree's `training_subsample`.
    #[serde(skip)]
    pub samples: Vec<usize>,
    pub count: usize,
    /// Mean label vector over the node's samples.
    pub mean: Vec<f64>,
    /// Fraction of the root subsample that falls in this node.
    pub measure: f64,
    pub split: Option<Split>,
    pub children: Option<(usize, usize)>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
    /// Dataset row indices the tree was trained on (with repetitions when bagged).
    #[serde(skip)]
    pub training_subsample: Vec<usize>,
    pub max_depth_reached: usize,
    pub n_features: usize,
}

impl DecisionTree {
    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Node ids from the root down to the leaf containing `x`.
    pub fn path(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.n_features {
            return Err(Error::Validation(format!(
                "point has dimension {}, tree expects {}",
                x.len(),
                self.n_features
            )));
        }
        let mut path = vec![self.root];
        let mut id = self.root;
        while let (Some(split), Some((left, right))) = (self.nodes[id].split, self.nodes[id].children) {
            id = if x[split.feature] <= split.threshold { left } else { right };
            path.push(id);
        }
        Ok(path)
    }

    pub fn leaf_for(&self, x: &[f64]) -> Result<&TreeNode> {
        let path = self.path(x)?;
        Ok(&self.nodes[*path.last().expect("path contains the root")])
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.leaf_for(x)?.mean.clone())
    }
}

/// Sum of squared l2 deviations of each side from its own mean.
///
/// Panics if either side is empty.
pub fn split_cost<L: AsRef<[f64]>, R: AsRef<[f64]>>(left: &[L], right: &[R]) -> f64 {
    assert!(!left.is_empty() && !right.is_empty(), "split_cost needs two non-empty sides");
    squared_deviation(left) + squared_deviation(right)
}

fn squared_deviation<V: AsRef<[f64]>>(vectors: &[V]) -> f64 {
    let dim = vectors[0].as_ref().len();
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    vectors
        .iter()
        .map(|v| v.as_ref().iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
        .sum()
}

/// Best axis-aligned split found by [`best_split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub cost: f64,
    /// Number of samples sent left.
    pub left_count: usize,
}

/// Exhaustive threshold scan over `features` for the rows in `rows`.
///
/// Candidates are midpoints between consecutive distinct values. Costs are
/// updated incrementally from running label sums. Ties resolve to the lowest
/// feature index, then the lowest threshold. Returns `None` when no candidate
/// strictly lowers the node's own squared deviation.
pub fn best_split(
    data: &LabeledDataset,
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitCandidate> {
    let n = rows.len();
    let min_leaf = min_samples_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let labels = data.labels();
    let dim = labels.cols();
    let mut total = vec![0.0; dim];
    let mut total_sq = 0.0;
    for &r in rows {
        for (t, y) in total.iter_mut().zip(labels.row(r)) {
            *t += y;
            total_sq += y * y;
        }
    }
    let node_cost = (total_sq - norm2(&total) / n as f64).max(0.0);
    let tolerance = 1e-12 * (1.0 + total_sq);
    if node_cost <= tolerance {
        return None;
    }

    let x = data.features();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut left = vec![0.0; dim];
    let mut best: Option<SplitCandidate> = None;
    for &f in features {
        order.clear();
        order.extend(0..n);
        order.sort_by(|&a, &b| x.get(rows[a], f).total_cmp(&x.get(rows[b], f)).then(a.cmp(&b)));
        left.iter_mut().for_each(|v| *v = 0.0);
        for i in 1..n {
            for (l, y) in left.iter_mut().zip(labels.row(rows[order[i - 1]])) {
                *l += y;
            }
            if i < min_leaf || n - i < min_leaf {
                continue;
            }
            let lo = x.get(rows[order[i - 1]], f);
            let hi = x.get(rows[order[i]], f);
            if lo >= hi {
                continue;
            }
            let right_norm2: f64 = left.iter().zip(&total).map(|(l, t)| (t - l) * (t - l)).sum();
            let cost = (total_sq - norm2(&left) / i as f64 - right_norm2 / (n - i) as f64).max(0.0);
            if best.is_none_or(|b| cost < b.cost) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(SplitCandidate { feature: f, threshold, cost, left_count: i });
            }
        }
    }
    best.filter(|b| b.cost < node_cost - tolerance)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn mean_of(data: &LabeledDataset, rows: impl Iterator<Item = usize>) -> (Vec<f64>, usize) {
    let labels = data.labels();
    let mut sum = vec![0.0; labels.cols()];
    let mut count = 0;
    for r in rows {
        for (s, y) in sum.iter_mut().zip(labels.row(r)) {
            *s += y;
        }
        count += 1;
    }
    sum.iter_mut().for_each(|s| *s /= count as f64);
    (sum, count)
}

/// Grows one tree on `subsample` (dataset row indices, repetitions allowed).
pub fn build_tree<R: Rng>(
    data: &LabeledDataset,
    subsample: Vec<usize>,
    params: &ForestParams,
    rng: &mut R,
) -> Result<DecisionTree> {
    if subsample.len() < 2 {
        return Err(Error::Size(format!("tree needs at least 2 samples, got {}", subsample.len())));
    }
    if let Some(&bad) = subsample.iter().find(|&&r| r >= data.n_samples()) {
        return Err(Error::Validation(format!("subsample index {bad} out of range")));
    }
    let root_count = subsample.len();
    let n_features = data.n_features();
    let all_features: Vec<usize> = (0..n_features).collect();
    let (root_mean, _) = mean_of(data, subsample.iter().copied());
    let mut nodes = vec![TreeNode {
        id: 0,
        parent: None,
        depth: 0,
        samples: (0..root_count).collect(),
        count: root_count,
        mean: root_mean,
        measure: 1.0,
        split: None,
        children: None,
    }];
    let mut stack = vec![0usize];
    let mut max_depth_reached = 0;
    let mut rows: Vec<usize> = Vec::new();
    while let Some(id) = stack.pop() {
        let depth = nodes[id].depth;
        max_depth_reached = max_depth_reached.max(depth);
        if depth >= params.max_depth || nodes[id].count < params.min_samples_split.max(2) {
            continue;
        }
        rows.clear();
        rows.extend(nodes[id].samples.iter().map(|&p| subsample[p]));
        let features = match params.feature_subsample {
            FeatureSubsample::All => all_features.clone(),
            FeatureSubsample::Sqrt => {
                let k = ((n_features as f64).sqrt().ceil() as usize).clamp(1, n_features);
                let mut picked = sample(rng, n_features, k).into_vec();
                picked.sort_unstable();
                picked
            }
        };
        let Some(candidate) = best_split(data, &rows, &features, params.min_samples_leaf) else {
            continue;
        };
        let x = data.features();
        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = nodes[id]
            .samples
            .iter()
            .partition(|&&p| x.get(subsample[p], candidate.feature) <= candidate.threshold);
        debug_assert_eq!(left_samples.len(), candidate.left_count);
        let mut child_ids = [0usize; 2];
        for (slot, samples) in [left_samples, right_samples].into_iter().enumerate() {
            let (mean, count) = mean_of(data, samples.iter().map(|&p| subsample[p]));
            let child_id = nodes.len();
            nodes.push(TreeNode {
                id: child_id,
                parent: Some(id),
                depth: depth + 1,
                samples,
                count,
                mean,
                measure: count as f64 / root_count as f64,
                split: None,
                children: None,
            });
            child_ids[slot] = child_id;
        }
        nodes[id].split = Some(Split { feature: candidate.feature, threshold: candidate.threshold });
        nodes[id].children = Some((child_ids[0], child_ids[1]));
        // Right pushed first so the left subtree is expanded first.
        stack.push(child_ids[1]);
        stack.push(child_ids[0]);
    }
    Ok(DecisionTree { nodes, root: 0, training_subsample: subsample, max_depth_reached, n_features })
}
