//! Geometric wavelet decomposition of a trained forest.
//!
//! Every non-root node `Ω'` with parent `Ω` contributes the atom
//! `ψ_Ω' = 1_Ω' (E_Ω' − E_Ω)` whose L2 norm is `‖E_Ω' − E_Ω‖ · |Ω'|^{1/2}`.
//! The root mean is kept separately as the father wavelet and never enters a
//! sparsity sum.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{DecisionTree, Forest, Split};

/// How the size `|Ω|` of a node enters the atom norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureMode {
    /// Fraction of the tree's training subsample inside the node.
    #[default]
    Empirical,
    /// Lebesgue area of the node's cell clipped to `[0,1]^2`. Two-dimensional
    /// features only.
    LebesgueBoxed,
}

impl MeasureMode {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "empirical" => Ok(MeasureMode::Empirical),
            "lebesgue-boxed" => Ok(MeasureMode::LebesgueBoxed),
            other => Err(Error::Config(format!("unknown measure `{other}` (empirical | lebesgue-boxed)"))),
        }
    }

    pub fn check_dimension(self, n_features: usize) -> Result<()> {
        if self == MeasureMode::LebesgueBoxed && n_features != 2 {
            return Err(Error::Config(format!(
                "lebesgue-boxed measure is only defined for 2-D features, data has {n_features}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveletAtom {
    pub tree_index: usize,
    pub node_id: usize,
    pub depth: usize,
    /// `E_Ω' − E_parent`.
    pub delta: Vec<f64>,
    pub measure: f64,
    pub norm: f64,
}

impl WaveletAtom {
    pub fn new(tree_index: usize, node_id: usize, depth: usize, delta: Vec<f64>, measure: f64) -> Self {
        let norm = atom_norm(&delta, measure);
        WaveletAtom { tree_index, node_id, depth, delta, measure, norm }
    }

    /// Norm of the same delta under a different node measure.
    pub fn norm_with_measure(&self, measure: f64) -> f64 {
        atom_norm(&self.delta, measure)
    }
}

pub fn atom_norm(delta: &[f64], measure: f64) -> f64 {
    delta.iter().map(|d| d * d).sum::<f64>().sqrt() * measure.sqrt()
}

/// Routing information needed to find the root-to-leaf path of a point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Routing {
    /// Per node: split and (left, right) children, or `None` for leaves.
    pub nodes: Vec<Option<(Split, usize, usize)>>,
    pub n_features: usize,
}

impl Routing {
    pub fn from_tree(tree: &DecisionTree) -> Self {
        let nodes = tree
            .nodes
            .iter()
            .map(|n| match (n.split, n.children) {
                (Some(s), Some((l, r))) => Some((s, l, r)),
                _ => None,
            })
            .collect();
        Routing { nodes, n_features: tree.n_features }
    }

    fn path(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.n_features {
            return Err(Error::Validation(format!(
                "point has dimension {}, decomposition expects {}",
                x.len(),
                self.n_features
            )));
        }
        let mut id = 0;
        let mut path = vec![0];
        while let Some((split, l, r)) = self.nodes[id] {
            id = if x[split.feature] <= split.threshold { l } else { r };
            path.push(id);
        }
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    fathers: Vec<Vec<f64>>,
    atoms: Vec<WaveletAtom>,
    tree_ranges: Vec<Range<usize>>,
    /// Per tree, node id → atom index (root has none).
    node_atoms: Vec<Vec<Option<usize>>>,
    routing: Vec<Routing>,
}

impl WaveletDecomposition {
    /// Assembles a decomposition from per-tree fathers, atoms and routing.
    /// Atoms must be grouped by tree in tree order.
    pub fn from_parts(fathers: Vec<Vec<f64>>, atoms: Vec<WaveletAtom>, routing: Vec<Routing>) -> Result<Self> {
        let n_trees = fathers.len();
        if routing.len() != n_trees {
            return Err(Error::Validation("routing and father counts differ".into()));
        }
        let mut tree_ranges = Vec::with_capacity(n_trees);
        let mut node_atoms: Vec<Vec<Option<usize>>> = routing.iter().map(|r| vec![None; r.nodes.len()]).collect();
        let mut start = 0;
        for t in 0..n_trees {
            let mut end = start;
            while end < atoms.len() && atoms[end].tree_index == t {
                let slot = node_atoms[t]
                    .get_mut(atoms[end].node_id)
                    .ok_or_else(|| Error::Validation(format!("atom node {} out of range", atoms[end].node_id)))?;
                *slot = Some(end);
                end += 1;
            }
            tree_ranges.push(start..end);
            start = end;
        }
        if start != atoms.len() {
            return Err(Error::Validation("atoms are not grouped by ascending tree index".into()));
        }
        Ok(WaveletDecomposition { fathers, atoms, tree_ranges, node_atoms, routing })
    }

    pub fn n_trees(&self) -> usize {
        self.fathers.len()
    }

    pub fn father(&self, tree_index: usize) -> &[f64] {
        &self.fathers[tree_index]
    }

    pub fn atoms(&self) -> &[WaveletAtom] {
        &self.atoms
    }

    pub fn tree_atoms(&self, tree_index: usize) -> &[WaveletAtom] {
        &self.atoms[self.tree_ranges[tree_index].clone()]
    }

    pub fn nonzero_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.norm > 0.0).count()
    }

    /// Father plus the deltas along the path of `x` in one tree. Equals the
    /// containing leaf's mean up to rounding.
    pub fn reconstruct(&self, tree_index: usize, x: &[f64]) -> Result<Vec<f64>> {
        let routing = self
            .routing
            .get(tree_index)
            .ok_or_else(|| Error::Parameter(format!("tree index {tree_index} out of range")))?;
        let mut value = self.fathers[tree_index].clone();
        for node in routing.path(x)?.into_iter().skip(1) {
            if let Some(a) = self.node_atoms[tree_index][node] {
                value.iter_mut().zip(&self.atoms[a].delta).for_each(|(v, d)| *v += d);
            }
        }
        Ok(value)
    }

    /// Average of per-tree reconstructions; equals the forest prediction.
    pub fn reconstruct_forest(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.fathers.first().map_or(0, Vec::len)];
        for t in 0..self.n_trees() {
            acc.iter_mut().zip(self.reconstruct(t, x)?).for_each(|(a, v)| *a += v);
        }
        let j = self.n_trees() as f64;
        acc.iter_mut().for_each(|a| *a /= j);
        Ok(acc)
    }

    /// Writes `tree_index,node_id,depth,norm` rows.
    pub fn write_atoms_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("tree_index,node_id,depth,norm\n");
        for a in &self.atoms {
            out.push_str(&format!("{},{},{},{:e}\n", a.tree_index, a.node_id, a.depth, a.norm));
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Decomposes every tree of `forest` into wavelet atoms.
pub fn decompose(forest: &Forest, measure: MeasureMode) -> Result<WaveletDecomposition> {
    if let Some(tree) = forest.trees.first() {
        measure.check_dimension(tree.n_features)?;
    }
    let per_tree: Vec<(Vec<f64>, Vec<WaveletAtom>, Routing)> = forest
        .trees
        .par_iter()
        .enumerate()
        .map(|(t, tree)| {
            let measures = match measure {
                MeasureMode::Empirical => tree.nodes.iter().map(|n| n.measure).collect(),
                MeasureMode::LebesgueBoxed => boxed_areas(tree),
            };
            let atoms = tree
                .nodes
                .iter()
                .filter_map(|node| {
                    let parent = &tree.nodes[node.parent?];
                    let delta: Vec<f64> = node.mean.iter().zip(&parent.mean).map(|(c, p)| c - p).collect();
                    Some(WaveletAtom::new(t, node.id, node.depth, delta, measures[node.id]))
                })
                .collect();
            (tree.node(tree.root).mean.clone(), atoms, Routing::from_tree(tree))
        })
        .collect();
    let mut fathers = Vec::new();
    let mut atoms = Vec::new();
    let mut routing = Vec::new();
    for (f, a, r) in per_tree {
        fathers.push(f);
        atoms.extend(a);
        routing.push(r);
    }
    WaveletDecomposition::from_parts(fathers, atoms, routing)
}

/// Area of each node's cell inside `[0,1]^n`, following the splits from the root.
fn boxed_areas(tree: &DecisionTree) -> Vec<f64> {
    let n = tree.n_features;
    let mut bounds: Vec<Vec<(f64, f64)>> = vec![Vec::new(); tree.nodes.len()];
    bounds[tree.root] = vec![(0.0, 1.0); n];
    let mut stack = vec![tree.root];
    while let Some(id) = stack.pop() {
        if let (Some(split), Some((l, r))) = (tree.nodes[id].split, tree.nodes[id].children) {
            let t = split.threshold.clamp(0.0, 1.0);
            let mut left = bounds[id].clone();
            left[split.feature].1 = left[split.feature].1.min(t);
            let mut right = bounds[id].clone();
            right[split.feature].0 = right[split.feature].0.max(t);
            bounds[l] = left;
            bounds[r] = right;
            stack.extend([l, r]);
        }
    }
    bounds.iter().map(|b| b.iter().map(|(lo, hi)| (hi - lo).max(0.0)).product()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, LabeledDataset, SyntheticKind, SyntheticSpec};
    use crate::forest::{build_forest, ForestParams, Sampling};
    use crate::matrix::Matrix;

    fn four_point_forest() -> Forest {
        let x = Matrix::from_rows(&[[0.1], [0.2], [0.8], [0.9]]).unwrap();
        let d = LabeledDataset::from_normalized(x, vec![0, 0, 1, 1], 2).unwrap();
        let params = ForestParams { n_trees: 1, sampling: Sampling::WithoutReplacement, ..Default::default() };
        build_forest(&d, &params, 0).unwrap()
    }

    #[test]
    fn four_sample_tree_atoms() {
        let dec = decompose(&four_point_forest(), MeasureMode::Empirical).unwrap();
        assert_eq!(dec.father(0), &[0.5, 0.5]);
        assert_eq!(dec.atoms().len(), 2);
        for a in dec.atoms() {
            let delta_norm = a.delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            assert!((delta_norm - 0.5f64.sqrt()).abs() < 1e-15);
            assert!((a.norm - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn four_sample_reconstruction_telescopes() {
        let forest = four_point_forest();
        let dec = decompose(&forest, MeasureMode::Empirical).unwrap();
        assert_eq!(dec.reconstruct(0, &[0.1]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(dec.reconstruct(0, &[0.85]).unwrap(), vec![0.0, 1.0]);
        assert!(dec.reconstruct(0, &[0.1, 0.2]).is_err());
        assert!(dec.reconstruct(3, &[0.1]).is_err());
    }

    #[test]
    fn single_leaf_tree_has_no_atoms() {
        let x = Matrix::from_rows(&[[0.1], [0.9], [0.4]]).unwrap();
        let d = LabeledDataset::from_normalized(x, vec![1, 1, 1], 2).unwrap();
        let forest = build_forest(&d, &ForestParams { n_trees: 1, ..Default::default() }, 0).unwrap();
        let dec = decompose(&forest, MeasureMode::Empirical).unwrap();
        assert!(dec.atoms().is_empty());
        assert_eq!(dec.father(0), &[0.0, 1.0]);
        assert_eq!(dec.reconstruct(0, &[0.3]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn zero_delta_gives_zero_norm() {
        let a = WaveletAtom::new(0, 1, 1, vec![0.0, 0.0], 0.3);
        assert_eq!(a.norm, 0.0);
        assert!((a.norm_with_measure(0.25) - 0.0).abs() < 1e-300);
        let b = WaveletAtom::new(0, 1, 1, vec![0.6, -0.8], 0.25);
        assert!((b.norm - 0.5).abs() < 1e-15);
        assert!((b.norm_with_measure(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn forest_reconstruction_matches_prediction() {
        let d = generate(&SyntheticSpec::new(SyntheticKind::spiral(), 3).with_samples(300)).unwrap();
        let forest = build_forest(&d, &ForestParams::default(), 1).unwrap();
        let dec = decompose(&forest, MeasureMode::Empirical).unwrap();
        for t in 0..forest.n_trees() {
            assert_eq!(dec.tree_atoms(t).len(), forest.trees[t].nodes.len() - 1);
        }
        for r in 0..d.n_samples() {
            let x = d.features().row(r);
            for (t, tree) in forest.trees.iter().enumerate() {
                let leaf = tree.leaf_for(x).unwrap();
                for (a, b) in dec.reconstruct(t, x).unwrap().iter().zip(&leaf.mean) {
                    assert!((a - b).abs() <= 1e-9);
                }
            }
            for (a, b) in dec.reconstruct_forest(x).unwrap().iter().zip(forest.predict(x).unwrap()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
        for a in dec.atoms() {
            assert!(a.norm <= 2f64.sqrt() + 1e-12);
        }
    }

    #[test]
    fn lebesgue_boxed_measure() {
        let forest = four_point_forest();
        assert!(matches!(decompose(&forest, MeasureMode::LebesgueBoxed), Err(Error::Config(_))));
        let d = generate(&SyntheticSpec::new(SyntheticKind::circles(), 3).with_samples(200)).unwrap();
        let forest = build_forest(&d, &ForestParams { n_trees: 1, ..Default::default() }, 1).unwrap();
        let dec = decompose(&forest, MeasureMode::LebesgueBoxed).unwrap();
        let tree = &forest.trees[0];
        // Children areas add up to the parent area.
        let area = |id: usize| dec.atoms().iter().find(|a| a.node_id == id).map_or(1.0, |a| a.measure);
        for node in &tree.nodes {
            if let Some((l, r)) = node.children {
                assert!((area(l) + area(r) - area(node.id)).abs() < 1e-12);
            }
        }
        assert_eq!(MeasureMode::from_name("lebesgue-boxed").unwrap(), MeasureMode::LebesgueBoxed);
        assert!(MeasureMode::from_name("volume").is_err());
    }

    #[test]
    fn atoms_csv_has_header_and_rows() {
        let dec = decompose(&four_point_forest(), MeasureMode::Empirical).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("atoms.csv");
        dec.write_atoms_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tree_index,node_id,depth,norm");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,1,1,"));
    }
}
