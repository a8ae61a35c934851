//! Non-adaptive dyadic tree on the unit square for `f = 1_Ω̃`.
//!
//! Level `k` holds `2^k` cells; the root is split in x first, then the axes
//! alternate, so level `2k` cells are squares of side `2^{−k}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{Rect, SmoothDomain};
use crate::error::{Error, Result};
use crate::sparsity::compensated_sum;

/// Largest level for which level sums and boundary counts are computed.
pub const MAX_LEVEL: usize = 30;
/// Largest level for which the full tree is materialized.
pub const MAX_FULL_LEVEL: usize = 16;
/// Levels below this are ignored by the ratio verdict.
pub const BURN_IN_LEVEL: usize = 8;
pub const CONVERGENT_RATIO: f64 = 0.95;
pub const DIVERGENT_RATIO: f64 = 1.05;

/// Dyadic cell addressed by its level and grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub level: usize,
    pub ix: u64,
    pub iy: u64,
}

impl CellId {
    pub const ROOT: CellId = CellId { level: 0, ix: 0, iy: 0 };

    /// Number of x and y divisions at this level.
    pub fn grid(level: usize) -> (u64, u64) {
        (1u64 << level.div_ceil(2), 1u64 << (level / 2))
    }

    pub fn rect(&self) -> Rect {
        let (nx, ny) = Self::grid(self.level);
        let (wx, wy) = (1.0 / nx as f64, 1.0 / ny as f64);
        Rect { x0: self.ix as f64 * wx, x1: (self.ix + 1) as f64 * wx, y0: self.iy as f64 * wy, y1: (self.iy + 1) as f64 * wy }
    }

    pub fn children(&self) -> [CellId; 2] {
        let level = self.level + 1;
        if self.level % 2 == 0 {
            [CellId { level, ix: 2 * self.ix, iy: self.iy }, CellId { level, ix: 2 * self.ix + 1, iy: self.iy }]
        } else {
            [CellId { level, ix: self.ix, iy: 2 * self.iy }, CellId { level, ix: self.ix, iy: 2 * self.iy + 1 }]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicCell {
    pub id: CellId,
    pub rect: Rect,
    pub measure: f64,
    /// Mean of the indicator over the cell.
    pub mean: f64,
}

fn make_cell(domain: &SmoothDomain, id: CellId) -> Result<DyadicCell> {
    let rect = id.rect();
    let measure = rect.area();
    let mean = domain.area_in(&rect) / measure;
    if !mean.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&mean) {
        return Err(Error::Numerical(format!(
            "area evaluation failed on cell level {} ({}, {}): mean {mean}",
            id.level, id.ix, id.iy
        )));
    }
    Ok(DyadicCell { id, rect, measure, mean: mean.clamp(0.0, 1.0) })
}

/// Fully materialized dyadic tree; level `k` holds all `2^k` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicTree {
    pub levels: Vec<Vec<DyadicCell>>,
    pub max_level: usize,
}

impl DyadicTree {
    pub fn build(domain: &SmoothDomain, max_level: usize) -> Result<Self> {
        domain.validate()?;
        if max_level > MAX_FULL_LEVEL {
            return Err(Error::Parameter(format!(
                "full dyadic tree limited to {MAX_FULL_LEVEL} levels, got {max_level}; level sums go deeper"
            )));
        }
        let mut levels = Vec::with_capacity(max_level + 1);
        let mut ids = vec![CellId::ROOT];
        for level in 0..=max_level {
            let cells = ids.par_iter().map(|&id| make_cell(domain, id)).collect::<Result<Vec<_>>>()?;
            levels.push(cells);
            if level < max_level {
                ids = ids.iter().flat_map(|c| c.children()).collect();
            }
        }
        Ok(DyadicTree { levels, max_level })
    }
}

/// Per-level sums of `‖ψ‖^τ` and the number of boundary cells per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSums {
    pub tau: f64,
    /// Index `k` holds the sum over level-`k` atoms; level 0 is the father
    /// and is always 0.
    pub sums: Vec<f64>,
    pub boundary_counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Convergent,
    Divergent,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Convergent => "convergent",
            Verdict::Divergent => "divergent",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

impl LevelSums {
    /// Geometric mean of consecutive even-level ratios `S_{k+2}/S_k` for
    /// `k ≥ BURN_IN_LEVEL`; `None` when there are not enough levels.
    pub fn even_ratio(&self) -> Option<f64> {
        let evens: Vec<f64> =
            (BURN_IN_LEVEL..self.sums.len()).filter(|k| k % 2 == 0).map(|k| self.sums[k]).collect();
        if evens.len() < 2 || evens.iter().any(|&s| s <= 0.0) {
            return None;
        }
        let logs: Vec<f64> = evens.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
        Some((logs.iter().sum::<f64>() / logs.len() as f64).exp())
    }

    pub fn verdict(&self) -> Verdict {
        match self.even_ratio() {
            Some(r) if r < CONVERGENT_RATIO => Verdict::Convergent,
            Some(r) if r > DIVERGENT_RATIO => Verdict::Divergent,
            _ => Verdict::Indeterminate,
        }
    }
}

/// Boundary cells per level together with their nonzero atom norms. Cells
/// away from the boundary have constant indicator, so their descendants
/// carry no atoms and are never visited.
fn walk(domain: &SmoothDomain, max_level: usize) -> Result<(Vec<Vec<f64>>, Vec<u64>)> {
    domain.validate()?;
    if max_level > MAX_LEVEL {
        return Err(Error::Parameter(format!("max_level must be at most {MAX_LEVEL}, got {max_level}")));
    }
    let mut norms = vec![Vec::new(); max_level + 1];
    let mut counts = vec![0u64; max_level + 1];
    let root = make_cell(domain, CellId::ROOT)?;
    let mut frontier = if domain.boundary_meets(&root.rect) { vec![root] } else { Vec::new() };
    counts[0] = frontier.len() as u64;
    for level in 1..=max_level {
        let expanded: Vec<(Vec<f64>, Vec<DyadicCell>)> = frontier
            .par_iter()
            .map(|parent| {
                let mut ns = Vec::with_capacity(2);
                let mut next = Vec::with_capacity(2);
                for id in parent.id.children() {
                    let cell = make_cell(domain, id)?;
                    let norm = (cell.mean - parent.mean).abs() * cell.measure.sqrt();
                    if norm > 0.0 {
                        ns.push(norm);
                    }
                    if domain.boundary_meets(&cell.rect) {
                        next.push(cell);
                    }
                }
                Ok((ns, next))
            })
            .collect::<Result<_>>()?;
        frontier = Vec::new();
        for (ns, next) in expanded {
            norms[level].extend(ns);
            frontier.extend(next);
        }
        counts[level] = frontier.len() as u64;
    }
    Ok((norms, counts))
}

/// Per-level sums `Σ_{l(Ω')=k} ‖ψ_Ω'‖^τ` under Lebesgue measure.
pub fn dyadic_level_sums(domain: &SmoothDomain, tau: f64, max_level: usize) -> Result<LevelSums> {
    if !(tau > 0.0 && tau < 2.0) {
        return Err(Error::Parameter(format!("tau must lie in (0, 2), got {tau}")));
    }
    let (norms, boundary_counts) = walk(domain, max_level)?;
    let sums = norms.iter().map(|ns| compensated_sum(ns.iter().map(|n| n.powf(tau)))).collect();
    Ok(LevelSums { tau, sums, boundary_counts })
}

/// Exact number of level-`level` cells meeting the boundary.
pub fn boundary_cube_count(domain: &SmoothDomain, level: usize) -> Result<u64> {
    Ok(walk(domain, level)?.1[level])
}

/// Level sums for several exponents sharing one traversal.
pub fn dyadic_level_sums_many(domain: &SmoothDomain, taus: &[f64], max_level: usize) -> Result<Vec<LevelSums>> {
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t < 2.0)) {
        return Err(Error::Parameter(format!("tau must lie in (0, 2), got {t}")));
    }
    let (norms, counts) = walk(domain, max_level)?;
    Ok(taus
        .iter()
        .map(|&tau| LevelSums {
            tau,
            sums: norms.iter().map(|ns| compensated_sum(ns.iter().map(|n| n.powf(tau)))).collect(),
            boundary_counts: counts.clone(),
        })
        .collect())
}

/// τ at which the even-level ratio crosses 1, by bisection on `[lo, hi]`.
pub fn crossing_tau(domain: &SmoothDomain, max_level: usize, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (norms, _) = walk(domain, max_level)?;
    let ratio = |tau: f64| {
        LevelSums {
            tau,
            sums: norms.iter().map(|ns| compensated_sum(ns.iter().map(|n| n.powf(tau)))).collect(),
            boundary_counts: Vec::new(),
        }
        .even_ratio()
    };
    let (mut a, mut b) = (lo, hi);
    let (ra, rb) = match (ratio(a), ratio(b)) {
        (Some(ra), Some(rb)) => (ra, rb),
        _ => return Err(Error::Numerical("level sums vanish; no crossing to locate".into())),
    };
    if (ra - 1.0).signum() == (rb - 1.0).signum() {
        return Err(Error::Numerical(format!("ratio does not cross 1 on [{lo}, {hi}] ({ra}, {rb})")));
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let rm = ratio(mid).ok_or_else(|| Error::Numerical("level sums vanish".into()))?;
        if (rm - 1.0).signum() == (ra - 1.0).signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_tree_invariants() {
        let d = SmoothDomain::default_disc();
        let t = DyadicTree::build(&d, 8).unwrap();
        for (k, cells) in t.levels.iter().enumerate() {
            assert_eq!(cells.len(), 1 << k);
            if k % 2 == 0 {
                assert!(cells.iter().all(|c| c.measure == 0.25f64.powi(k as i32 / 2)));
            }
            let total: f64 = cells.iter().map(|c| c.measure * c.mean).sum();
            assert!((total - d.area()).abs() < 1e-13);
        }
        // Children tile the parent: the children's weighted means recombine.
        for k in 0..8 {
            for parent in &t.levels[k] {
                let kids: Vec<&DyadicCell> =
                    t.levels[k + 1].iter().filter(|c| parent.id.children().contains(&c.id)).collect();
                assert_eq!(kids.len(), 2);
                let m: f64 = kids.iter().map(|c| c.measure * c.mean).sum::<f64>() / parent.measure;
                assert!((m - parent.mean).abs() < 1e-12);
                assert_eq!(kids[0].measure + kids[1].measure, parent.measure);
            }
        }
        assert!(DyadicTree::build(&d, 17).is_err());
    }

    #[test]
    fn level_sums_match_full_tree() {
        let d = SmoothDomain::default_disc();
        let t = DyadicTree::build(&d, 10).unwrap();
        let sums = dyadic_level_sums(&d, 1.3, 10).unwrap();
        assert_eq!(sums.sums[0], 0.0);
        for k in 1..=10 {
            let direct: f64 = t.levels[k]
                .iter()
                .map(|c| {
                    let parent = t.levels[k - 1].iter().find(|p| p.id.children().contains(&c.id)).unwrap();
                    ((c.mean - parent.mean).abs() * c.measure.sqrt()).powf(1.3)
                })
                .sum();
            assert!((direct - sums.sums[k]).abs() < 1e-12 * direct.max(1.0), "level {k}");
        }
    }

    #[test]
    fn disc_dichotomy() {
        let d = SmoothDomain::default_disc();
        let conv = dyadic_level_sums(&d, 1.5, 20).unwrap();
        assert!(conv.even_ratio().unwrap() < 0.95);
        assert_eq!(conv.verdict(), Verdict::Convergent);
        let div = dyadic_level_sums(&d, 0.8, 20).unwrap();
        assert!(div.even_ratio().unwrap() > 1.05);
        assert_eq!(div.verdict(), Verdict::Divergent);
        let c = crossing_tau(&d, 20, 0.5, 1.5, 1e-4).unwrap();
        assert!((0.9..=1.1).contains(&c), "{c}");
    }

    #[test]
    fn boundary_counts_grow_like_two_to_the_k() {
        let d = SmoothDomain::default_disc();
        assert_eq!(boundary_cube_count(&d, 0).unwrap(), 1);
        let counts = walk(&d, 20).unwrap().1;
        let mut prev = None;
        for k in 4..=10 {
            let c = counts[2 * k] as f64 / (1u64 << k) as f64;
            assert!(c < 8.0, "k={k}: {c}");
            if let Some(p) = prev {
                let p: f64 = p;
                if k >= 7 {
                    assert!((c - p).abs() / p < 0.1, "k={k}: {p} -> {c}");
                }
            }
            prev = Some(c);
        }
    }

    #[test]
    fn tiny_disc_counts_are_bounded_until_cells_shrink() {
        let d = SmoothDomain::Disc { cx: 0.5, cy: 0.5, r: 0.01 };
        // Cells of side ≥ 2r meet the boundary at most four times.
        for k in 0..=5 {
            assert!(boundary_cube_count(&d, 2 * k).unwrap() <= 4);
        }
    }

    #[test]
    fn uniform_cells_contribute_nothing() {
        // Levels 1 and 2 of the centered disc: every cell straddles the
        // boundary, but deeper cells fully inside have zero atoms.
        let d = SmoothDomain::default_disc();
        let t = DyadicTree::build(&d, 6).unwrap();
        let inside = t.levels[6].iter().filter(|c| c.mean == 1.0).count();
        assert!(inside > 0);
        let sums = dyadic_level_sums(&d, 1.0, 6).unwrap();
        let nonzero: usize = t.levels[6]
            .iter()
            .filter(|c| {
                let p = t.levels[5].iter().find(|p| p.id.children().contains(&c.id)).unwrap();
                c.mean != p.mean
            })
            .count();
        assert!(nonzero < t.levels[6].len());
        assert!(sums.sums[6] > 0.0);
    }

    #[test]
    fn parameter_checks() {
        let d = SmoothDomain::default_disc();
        assert!(dyadic_level_sums(&d, 0.0, 4).is_err());
        assert!(dyadic_level_sums(&d, 2.0, 4).is_err());
        assert!(dyadic_level_sums(&d, 1.0, 31).is_err());
    }
}
