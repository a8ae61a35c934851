//! Random forests of variance-minimizing trees with seeded bagging.

mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

pub use tree::{best_split, build_tree, split_cost, DecisionTree, Split, SplitCandidate, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    #[default]
    All,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Bootstrap: `⌈fraction·m⌉` draws with replacement.
    #[default]
    WithReplacement,
    /// `⌈fraction·m⌉` distinct rows, kept in dataset order.
    WithoutReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub bagging_fraction: f64,
    pub sampling: Sampling,
    pub feature_subsample: FeatureSubsample,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 3,
            max_depth: 15,
            min_samples_leaf: 1,
            min_samples_split: 2,
            bagging_fraction: 1.0,
            sampling: Sampling::WithReplacement,
            feature_subsample: FeatureSubsample::All,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Parameter("forest needs at least one tree".into()));
        }
        if !(self.bagging_fraction > 0.0 && self.bagging_fraction <= 1.0) {
            return Err(Error::Parameter(format!(
                "bagging fraction must lie in (0,1], got {}",
                self.bagging_fraction
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Parameter("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
    pub master_seed: u64,
}

/// Independent RNG stream for tree `index` under `master_seed`.
pub fn tree_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

/// Row indices a tree trains on, drawn from its own stream.
pub fn draw_subsample<R: Rng>(m: usize, params: &ForestParams, rng: &mut R) -> Vec<usize> {
    let size = ((params.bagging_fraction * m as f64).ceil() as usize).clamp(1, m);
    match params.sampling {
        Sampling::WithReplacement => (0..size).map(|_| rng.random_range(0..m)).collect(),
        Sampling::WithoutReplacement => {
            let mut rows = rand::seq::index::sample(rng, m, size).into_vec();
            rows.sort_unstable();
            rows
        }
    }
}

/// Builds `params.n_trees` trees in parallel. The result does not depend on
/// the number of worker threads.
pub fn build_forest(data: &LabeledDataset, params: &ForestParams, master_seed: u64) -> Result<Forest> {
    params.validate()?;
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|j| {
            let mut rng = tree_rng(master_seed, j);
            let subsample = draw_subsample(data.n_samples(), params, &mut rng);
            build_tree(data, subsample, params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest { trees, params: *params, master_seed })
}

impl Forest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Average of the containing-leaf means over all trees.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out: Option<Vec<f64>> = None;
        for tree in &self.trees {
            let leaf = tree.leaf_for(x)?;
            match out.as_mut() {
                None => out = Some(leaf.mean.clone()),
                Some(acc) => acc.iter_mut().zip(&leaf.mean).for_each(|(a, m)| *a += m),
            }
        }
        let mut out = out.ok_or_else(|| Error::Validation("forest has no trees".into()))?;
        let j = self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v /= j);
        Ok(out)
    }

    /// JSON node arena for debugging and cross-checks.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest serializes")
    }
}
