//! Adaptive tree for piecewise-constant box functions `f = Σ c_k 1_{B_k}`.
//!
//! Cuts are placed on box faces only, so after finitely many splits every
//! leaf is either a box or a zero region and no deeper atom can be nonzero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::Split;
use crate::wavelet::{Routing, WaveletAtom, WaveletDecomposition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub value: f64,
}

impl Cube {
    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    fn overlaps(&self, o: &Cube) -> bool {
        (0..self.lo.len()).all(|d| self.lo[d] < o.hi[d] && o.lo[d] < self.hi[d])
    }

    fn clip(&self, lo: &[f64], hi: &[f64]) -> Option<Cube> {
        let nlo: Vec<f64> = self.lo.iter().zip(lo).map(|(a, b)| a.max(*b)).collect();
        let nhi: Vec<f64> = self.hi.iter().zip(hi).map(|(a, b)| a.min(*b)).collect();
        nlo.iter().zip(&nhi).all(|(l, h)| l < h).then(|| Cube { lo: nlo, hi: nhi, value: self.value })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeFunction {
    pub n: usize,
    pub cubes: Vec<Cube>,
}

impl CubeFunction {
    pub fn new(n: usize, cubes: Vec<Cube>) -> Result<Self> {
        let f = CubeFunction { n, cubes };
        f.validate()?;
        Ok(f)
    }

    /// `k` non-overlapping boxes in `[0,1]^2` laid out on a diagonal, with
    /// values `1, 2, …`.
    pub fn diagonal_boxes(k: usize) -> Result<Self> {
        let step = 1.0 / (k as f64 + 1.0);
        let cubes = (0..k)
            .map(|i| {
                let a = step * (i as f64 + 0.5) + 0.1 * step;
                let b = step * (i as f64 + 1.5) - 0.1 * step;
                Cube { lo: vec![a, a], hi: vec![b, b], value: i as f64 + 1.0 }
            })
            .collect();
        CubeFunction::new(2, cubes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Validation("cube function needs dimension ≥ 1".into()));
        }
        for (i, c) in self.cubes.iter().enumerate() {
            if c.lo.len() != self.n || c.hi.len() != self.n {
                return Err(Error::Validation(format!("box {i} has the wrong dimension")));
            }
            let inside = c.lo.iter().zip(&c.hi).all(|(l, h)| *l > 0.0 && l < h && *h < 1.0);
            if !inside || !c.value.is_finite() {
                return Err(Error::Validation(format!("box {i} must be non-empty and strictly inside (0,1)^{}", self.n)));
            }
            if let Some(j) = self.cubes[..i].iter().position(|o| o.overlaps(c)) {
                return Err(Error::Validation(format!("boxes {j} and {i} overlap")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.cubes
            .iter()
            .find(|c| (0..self.n).all(|d| c.lo[d] <= x[d] && x[d] <= c.hi[d]))
            .map_or(0.0, |c| c.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub mean: f64,
    pub measure: f64,
    pub split: Option<Split>,
    pub children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct CubeTree {
    pub nodes: Vec<CubeNode>,
    pub decomposition: WaveletDecomposition,
}

impl CubeTree {
    pub fn split_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_some()).count()
    }

    /// Depth below which every atom vanishes.
    pub fn isolation_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Splits with nonzero child atoms plus a nonzero father. The two atoms
    /// of a binary split satisfy `|Ω₁|δ₁ + |Ω₂|δ₂ = 0`, so each such split
    /// adds one independent atom.
    pub fn independent_atom_count(&self) -> usize {
        let dec = &self.decomposition;
        let splits = self
            .nodes
            .iter()
            .filter(|n| {
                n.children.is_some_and(|(l, _)| dec.tree_atoms(0).iter().any(|a| a.node_id == l && a.norm > 0.0))
            })
            .count();
        splits + usize::from(dec.father(0)[0] != 0.0)
    }
}

/// A face cut `x_d = t` strictly inside the region that does not pass
/// through the interior of any piece; separating cuts are preferred.
fn choose_cut(lo: &[f64], hi: &[f64], pieces: &[Cube]) -> (usize, f64) {
    let n = lo.len();
    let mut clean = None;
    for p in pieces {
        for d in 0..n {
            for t in [p.lo[d], p.hi[d]] {
                if !(lo[d] < t && t < hi[d]) || pieces.iter().any(|q| q.lo[d] < t && t < q.hi[d]) {
                    continue;
                }
                let left = pieces.iter().filter(|q| q.hi[d] <= t).count();
                if left > 0 && left < pieces.len() {
                    return (d, t);
                }
                clean.get_or_insert((d, t));
            }
        }
    }
    if let Some(c) = clean {
        return c;
    }
    // No clean face cut: cut through the first piece's first interior face.
    let p = &pieces[0];
    for d in 0..n {
        for t in [p.lo[d], p.hi[d]] {
            if lo[d] < t && t < hi[d] {
                return (d, t);
            }
        }
    }
    unreachable!("a piece that differs from its region has an interior face")
}

/// Builds the adaptive tree on `[0,1]^n` isolating every box with face cuts,
/// together with its Lebesgue-measure wavelet decomposition.
pub fn adaptive_cube_tree(f: &CubeFunction) -> Result<CubeTree> {
    f.validate()?;
    let n = f.n;
    let mut nodes: Vec<CubeNode> = Vec::new();
    let mut pieces_of: Vec<Vec<Cube>> = Vec::new();
    let mean_of = |lo: &[f64], hi: &[f64], pieces: &[Cube]| {
        let vol: f64 = lo.iter().zip(hi).map(|(l, h)| h - l).product();
        let mass: f64 = pieces.iter().map(|p| p.value * p.volume()).sum();
        (mass / vol, vol)
    };
    let (lo, hi) = (vec![0.0; n], vec![1.0; n]);
    let (mean, measure) = mean_of(&lo, &hi, &f.cubes);
    nodes.push(CubeNode { id: 0, parent: None, depth: 0, lo, hi, mean, measure, split: None, children: None });
    pieces_of.push(f.cubes.clone());
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        let pieces = std::mem::take(&mut pieces_of[id]);
        let (lo, hi) = (nodes[id].lo.clone(), nodes[id].hi.clone());
        let is_leaf = pieces.is_empty() || (pieces.len() == 1 && pieces[0].lo == lo && pieces[0].hi == hi);
        if is_leaf {
            continue;
        }
        let (d, t) = choose_cut(&lo, &hi, &pieces);
        let mut lhi = hi.clone();
        lhi[d] = t;
        let mut rlo = lo.clone();
        rlo[d] = t;
        let mut children = [0usize; 2];
        for (slot, (clo, chi)) in [(lo.clone(), lhi), (rlo, hi.clone())].into_iter().enumerate() {
            let sub: Vec<Cube> = pieces.iter().filter_map(|p| p.clip(&clo, &chi)).collect();
            let (mean, measure) = mean_of(&clo, &chi, &sub);
            let cid = nodes.len();
            nodes.push(CubeNode {
                id: cid,
                parent: Some(id),
                depth: nodes[id].depth + 1,
                lo: clo,
                hi: chi,
                mean,
                measure,
                split: None,
                children: None,
            });
            pieces_of.push(sub);
            children[slot] = cid;
        }
        nodes[id].split = Some(Split { feature: d, threshold: t });
        nodes[id].children = Some((children[0], children[1]));
        stack.push(children[1]);
        stack.push(children[0]);
    }
    let atoms = nodes
        .iter()
        .filter_map(|node| {
            let parent = &nodes[node.parent?];
            Some(WaveletAtom::new(0, node.id, node.depth, vec![node.mean - parent.mean], node.measure))
        })
        .collect();
    let routing = Routing {
        nodes: nodes.iter().map(|nd| nd.split.zip(nd.children).map(|(s, (l, r))| (s, l, r))).collect(),
        n_features: n,
    };
    let decomposition = WaveletDecomposition::from_parts(vec![vec![nodes[0].mean]], atoms, vec![routing])?;
    Ok(CubeTree { nodes, decomposition })
}
