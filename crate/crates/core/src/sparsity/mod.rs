//! τ-sparsity of tree and forest wavelet decompositions, and the numerical
//! estimate of the transition index τ* from a sampled sparsity curve.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavelet::WaveletDecomposition;

pub const DEFAULT_EPS_LOW: f64 = 0.1;
pub const DEFAULT_EPS_HIGH: f64 = 0.4;
pub const DEFAULT_ALPHA_CAP: f64 = 2.0;

/// Neumaier-compensated sum; order-dependent only through the fixed input order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 2.0) {
        return Err(Error::Parameter(format!("tau must lie in (0,2), got {tau}")));
    }
    Ok(())
}

/// `Σ ‖ψ‖^τ` over one tree's atoms from cached log-norms.
fn power_sum(log_norms: &[f64], tau: f64) -> f64 {
    compensated_sum(log_norms.iter().map(|&l| (tau * l).exp()))
}

fn log_norms(dec: &WaveletDecomposition, tree_index: usize) -> Vec<f64> {
    dec.tree_atoms(tree_index).iter().filter(|a| a.norm > 0.0).map(|a| a.norm.ln()).collect()
}

/// `N_τ(f, T)^τ = Σ_{Ω≠Ω0} ‖ψ_Ω‖^τ`; tends to the nonzero-atom count as τ → 0.
pub fn tree_sparsity_pow(dec: &WaveletDecomposition, tree_index: usize, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    check_tree(dec, tree_index)?;
    Ok(power_sum(&log_norms(dec, tree_index), tau))
}

/// `N_τ(f, T) = (Σ_{Ω≠Ω0} ‖ψ_Ω‖^τ)^{1/τ}`. Zero for an atom-free tree.
pub fn tree_sparsity(dec: &WaveletDecomposition, tree_index: usize, tau: f64) -> Result<f64> {
    Ok(tree_sparsity_pow(dec, tree_index, tau)?.powf(1.0 / tau))
}

fn check_tree(dec: &WaveletDecomposition, tree_index: usize) -> Result<()> {
    if tree_index >= dec.n_trees() {
        return Err(Error::Parameter(format!(
            "tree index {tree_index} out of range for {} trees",
            dec.n_trees()
        )));
    }
    Ok(())
}

/// `N_τ(f, F) = (1/J) (Σ_j N_τ(f, T_j)^τ)^{1/τ}`.
pub fn forest_sparsity(dec: &WaveletDecomposition, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let terms = CurveTerms::new(dec);
    Ok(terms.evaluate(tau).forest.exp())
}

/// Cached log-norms of every tree's nonzero atoms.
struct CurveTerms {
    per_tree: Vec<Vec<f64>>,
}

struct CurvePoint {
    /// `ln N_τ(f, F)`, `-inf` when there are no nonzero atoms.
    forest: f64,
    per_tree: Vec<f64>,
}

impl CurveTerms {
    fn new(dec: &WaveletDecomposition) -> Self {
        CurveTerms { per_tree: (0..dec.n_trees()).map(|t| log_norms(dec, t)).collect() }
    }

    fn evaluate(&self, tau: f64) -> CurvePoint {
        let sums: Vec<f64> = self.per_tree.iter().map(|l| power_sum(l, tau)).collect();
        let total = compensated_sum(sums.iter().copied());
        let j = self.per_tree.len().max(1) as f64;
        CurvePoint { forest: total.ln() / tau - j.ln(), per_tree: sums.iter().map(|s| s.ln() / tau).collect() }
    }
}

/// Evenly spaced τ samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { min: 0.05, max: 1.95, points: 100 }
    }
}

impl GridSpec {
    pub fn taus(&self) -> Result<Vec<f64>> {
        if self.points == 0 {
            return Err(Error::Parameter("tau grid must have at least one point".into()));
        }
        if self.points > 1 && self.min >= self.max {
            return Err(Error::Parameter(format!("tau grid bounds {} >= {}", self.min, self.max)));
        }
        let grid = linspace(self.min, self.max, self.points);
        validate_grid(&grid)?;
        Ok(grid)
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Parameter("tau grid is empty".into()));
    }
    for w in grid.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::Parameter("tau grid must be strictly increasing".into()));
        }
    }
    for &t in grid {
        check_tau(t)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityCurve {
    pub tau_grid: Vec<f64>,
    /// `N_τ(f, F)` per grid point.
    pub values: Vec<f64>,
    /// `ln N_τ(f, F)`; `-inf` for an atom-free forest.
    pub log_values: Vec<f64>,
    /// `N_τ(f, T_j)` per tree (rows) and grid point (columns).
    pub per_tree_values: Vec<Vec<f64>>,
}

impl SparsityCurve {
    /// Builds a curve from externally computed values (e.g. a closed form).
    pub fn from_values(tau_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_grid(&tau_grid)?;
        if tau_grid.len() != values.len() {
            return Err(Error::Size("grid and values differ in length".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Numerical("curve values must be finite and non-negative".into()));
        }
        let log_values = values.iter().map(|v| v.ln()).collect();
        Ok(SparsityCurve { tau_grid, values, log_values, per_tree_values: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.tau_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_grid.is_empty()
    }

    /// True when every value is zero (no nonzero atoms anywhere).
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Checks that the curve does not increase along the grid, allowing a
    /// relative rounding slack of `rel_tol`.
    pub fn is_non_increasing(&self, rel_tol: f64) -> bool {
        self.log_values.windows(2).all(|w| w[1] <= w[0] + rel_tol || w[0] == f64::NEG_INFINITY)
    }
}

/// Evaluates `N_τ(f, F)` at every grid point, in parallel over the grid.
pub fn sparsity_curve(dec: &WaveletDecomposition, grid: &[f64]) -> Result<SparsityCurve> {
    validate_grid(grid)?;
    let terms = CurveTerms::new(dec);
    let points: Vec<CurvePoint> = grid.par_iter().map(|&tau| terms.evaluate(tau)).collect();
    let log_values: Vec<f64> = points.iter().map(|p| p.forest).collect();
    let values: Vec<f64> = log_values.iter().map(|l| l.exp()).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "N_tau overflows at tau = {} (ln N = {})",
            grid[i], log_values[i]
        )));
    }
    let per_tree_values = (0..dec.n_trees())
        .map(|t| points.iter().map(|p| p.per_tree[t].exp()).collect())
        .collect();
    Ok(SparsityCurve { tau_grid: grid.to_vec(), values, log_values, per_tree_values })
}

/// Which transform of the curve the derivative angles are measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CurveScale {
    /// `θ = arctan(d ln N / dτ)`; invariant to rescaling of the atom norms.
    #[default]
    Log,
    /// Both τ and N affinely mapped onto `[0,1]` before differentiating.
    UnitSquare,
    /// `θ = arctan(dN / dτ)` on the raw curve.
    Raw,
}

impl CurveScale {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "log" => Ok(CurveScale::Log),
            "unit-square" => Ok(CurveScale::UnitSquare),
            "raw" => Ok(CurveScale::Raw),
            other => Err(Error::Config(format!("unknown curve scale `{other}` (log | unit-square | raw)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub eps_low: f64,
    pub eps_high: f64,
    pub scale: CurveScale,
    /// α* reported for curves with no usable slope information.
    pub alpha_cap: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            eps_low: DEFAULT_EPS_LOW,
            eps_high: DEFAULT_EPS_HIGH,
            scale: CurveScale::Log,
            alpha_cap: DEFAULT_ALPHA_CAP,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_low >= 0.0 && self.eps_low < self.eps_high && self.eps_high <= FRAC_PI_2) {
            return Err(Error::Parameter(format!(
                "need 0 <= eps_low < eps_high <= pi/2, got [{}, {}]",
                self.eps_low, self.eps_high
            )));
        }
        if !(self.alpha_cap > 0.0 && self.alpha_cap.is_finite()) {
            return Err(Error::Parameter(format!("alpha cap must be positive, got {}", self.alpha_cap)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauEstimate {
    pub tau_star: f64,
    pub alpha_star: f64,
    pub eps_low: f64,
    pub eps_high: f64,
    pub scale: CurveScale,
    /// Transformed curve the angles were measured on.
    pub normalized: Vec<f64>,
    pub derivatives: Vec<f64>,
    /// `θ(τ_k)` in radians.
    pub angles: Vec<f64>,
    /// Grid indices in the band `S`.
    pub selected: Vec<usize>,
    /// No grid point fell in the band; τ* is the steepest point instead.
    pub fallback_used: bool,
    /// The curve carried no slope information (no or a single distinct
    /// atom norm level); α* is the configured cap.
    pub degenerate: bool,
}

/// `α* = 1/τ* − 1/2`.
pub fn alpha_from_tau(tau_star: f64) -> f64 {
    1.0 / tau_star - 0.5
}

/// `τ* = 1/(α* + 1/2)`.
pub fn tau_from_alpha(alpha_star: f64) -> f64 {
    1.0 / (alpha_star + 0.5)
}

/// Derivative angles, the band `S = {τ_k : −π/2 + ε_low ≤ θ(τ_k) ≤ −π/2 + ε_high}`
/// and `τ* = mean(S)` in original τ units.
pub fn estimate_tau_star(curve: &SparsityCurve, params: &EstimatorParams) -> Result<TauEstimate> {
    params.validate()?;
    let n = curve.len();
    if n < 3 {
        return Err(Error::Parameter(format!("tau estimation needs at least 3 grid points, got {n}")));
    }
    let degenerate = |normalized: Vec<f64>| {
        let tau_star = tau_from_alpha(params.alpha_cap);
        TauEstimate {
            tau_star,
            alpha_star: alpha_from_tau(tau_star),
            eps_low: params.eps_low,
            eps_high: params.eps_high,
            scale: params.scale,
            normalized,
            derivatives: vec![0.0; n],
            angles: vec![0.0; n],
            selected: Vec::new(),
            fallback_used: false,
            degenerate: true,
        }
    };
    if curve.is_zero() {
        return Ok(degenerate(vec![0.0; n]));
    }

    let taus = &curve.tau_grid;
    let (xs, ys): (Vec<f64>, Vec<f64>) = match params.scale {
        CurveScale::Log => (taus.clone(), curve.log_values.clone()),
        CurveScale::Raw => (taus.clone(), curve.values.clone()),
        CurveScale::UnitSquare => {
            let (t0, t1) = (taus[0], taus[n - 1]);
            let lo = curve.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = curve.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = if hi > lo { hi - lo } else { 1.0 };
            (
                taus.iter().map(|t| (t - t0) / (t1 - t0)).collect(),
                curve.values.iter().map(|v| (v - lo) / span).collect(),
            )
        }
    };
    let spread = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - ys.iter().copied().fold(f64::INFINITY, f64::min);
    if spread <= 1e-12 * ys.iter().map(|y| y.abs()).fold(1.0, f64::max) {
        return Ok(degenerate(ys));
    }

    let derivatives = finite_differences(&xs, &ys);
    let angles: Vec<f64> = derivatives.iter().map(|d| d.atan()).collect();
    let (lo, hi) = (-FRAC_PI_2 + params.eps_low, -FRAC_PI_2 + params.eps_high);
    let selected: Vec<usize> = (0..n).filter(|&k| angles[k] >= lo && angles[k] <= hi).collect();
    let (tau_star, fallback_used) = if selected.is_empty() {
        let steepest = (0..n).min_by(|&a, &b| angles[a].total_cmp(&angles[b]).then(a.cmp(&b))).expect("n >= 3");
        (taus[steepest], true)
    } else {
        (selected.iter().map(|&k| taus[k]).sum::<f64>() / selected.len() as f64, false)
    };
    Ok(TauEstimate {
        tau_star,
        alpha_star: alpha_from_tau(tau_star),
        eps_low: params.eps_low,
        eps_high: params.eps_high,
        scale: params.scale,
        normalized: ys,
        derivatives,
        angles,
        selected,
        fallback_used,
        degenerate: false,
    })
}

/// Central differences inside, one-sided at the two ends.
pub fn finite_differences(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            (ys[b] - ys[a]) / (xs[b] - xs[a])
        })
        .collect()
}

/// Writes `tau,N,N_normalized,derivative,theta,in_S` rows.
pub fn write_curve_csv(path: &Path, curve: &SparsityCurve, estimate: &TauEstimate) -> Result<()> {
    let mut out = String::from("tau,N,N_normalized,derivative,theta,in_S\n");
    for k in 0..curve.len() {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{},{}\n",
            curve.tau_grid[k],
            curve.values[k],
            estimate.normalized[k],
            estimate.derivatives[k],
            estimate.angles[k],
            u8::from(estimate.selected.contains(&k)),
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
