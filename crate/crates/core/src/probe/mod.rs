//! Layer-by-layer sparsity probing: for every layer and every probe seed,
//! normalize → forest → wavelets → τ-sparsity curve → τ*, then aggregate.

mod stack;
pub mod synthetic;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use stack::{Layer, LayerStack, Manifest, ManifestLayer, Provenance, LABELS_FILE, MANIFEST_FILE};

use crate::clustering::{cluster_and_score, ClusteringReport};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::forest::{build_forest, ForestParams};
use crate::matrix::Matrix;
use crate::sparsity::{estimate_tau_star, sparsity_curve, write_curve_csv, EstimatorParams, GridSpec, SparsityCurve, TauEstimate};
use crate::wavelet::{decompose, MeasureMode};

pub const DEFAULT_SEEDS: [u64; 3] = [0, 1, 2];
pub const SEED_NOTE: &str = "probe seeds seed the forests; they do not resample the network that produced the features";

/// Everything that affects a probe result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub forest: ForestParams,
    pub estimator: EstimatorParams,
    pub grid: GridSpec,
    pub measure: MeasureMode,
    /// Project layers wider than this many columns down to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_dim: Option<usize>,
    /// Run KMeans with this many clusters on each layer and score it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clustering_k: Option<usize>,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams {
            forest: ForestParams::default(),
            estimator: EstimatorParams::default(),
            grid: GridSpec::default(),
            measure: MeasureMode::default(),
            projection_dim: None,
            clustering_k: None,
        }
    }
}

impl ProbeParams {
    pub fn validate(&self) -> Result<()> {
        self.forest.validate()?;
        self.estimator.validate()?;
        self.grid.taus()?;
        if self.projection_dim == Some(0) {
            return Err(Error::Config("projection dimension must be positive".into()));
        }
        if self.clustering_k == Some(0) {
            return Err(Error::Config("clustering k must be positive".into()));
        }
        Ok(())
    }

    /// One-line summary of the settings that define a run.
    pub fn settings_line(&self) -> String {
        format!(
            "trees={} depth={} eps=[{},{}]",
            self.forest.n_trees, self.forest.max_depth, self.estimator.eps_low, self.estimator.eps_high
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub tau_star: f64,
    pub alpha_star: f64,
    pub fallback_used: bool,
    pub degenerate: bool,
    pub band_size: usize,
    pub nonzero_atoms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    /// Sample standard deviation; absent for a single seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Spread {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2)
            .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Spread { mean, std, min, max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionInfo {
    pub from: usize,
    pub to: usize,
    pub seed: u64,
}

/// Aggregate for one layer, as written to the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub name: String,
    pub n_features: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionInfo>,
    pub tau_star: Spread,
    pub alpha_star: Spread,
    pub fallback_count: usize,
    pub degenerate: bool,
    pub seeds: Vec<SeedResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clustering: Option<ClusteringReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curve_files: Vec<String>,
}

/// Full per-layer result, including curves for plotting.
#[derive(Debug, Clone)]
pub struct LayerProbe {
    pub summary: LayerSummary,
    pub curves: Vec<SparsityCurve>,
    pub estimates: Vec<TauEstimate>,
}

/// Sparse ±1 projection with entries `±sqrt(3/to)` at rate 1/6 each.
pub fn random_projection(x: &Matrix, to: usize, seed: u64) -> Result<Matrix> {
    let from = x.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let die = Uniform::new(0u8, 6).expect("valid range");
    let scale = (3.0 / to as f64).sqrt();
    // Column-major list of nonzeros per output coordinate.
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); to];
    for i in 0..from {
        for col in columns.iter_mut() {
            match die.sample(&mut rng) {
                0 => col.push((i, scale)),
                1 => col.push((i, -scale)),
                _ => {}
            }
        }
    }
    let data: Vec<f64> = (0..x.rows())
        .into_par_iter()
        .flat_map_iter(|r| {
            let row = x.row(r);
            columns.iter().map(move |c| c.iter().map(|&(i, w)| row[i] * w).sum::<f64>()).collect::<Vec<_>>()
        })
        .collect();
    Matrix::from_vec(x.rows(), to, data)
}

/// Probes one feature matrix at every seed (seeds run in parallel).
pub fn probe_layer(
    name: &str,
    features: &Matrix,
    class_ids: &[usize],
    n_classes: usize,
    params: &ProbeParams,
    seeds: &[u64],
) -> Result<LayerProbe> {
    run_layer(name, features, class_ids, n_classes, params, seeds).map_err(|e| e.in_layer(name))
}

fn run_layer(
    name: &str,
    features: &Matrix,
    class_ids: &[usize],
    n_classes: usize,
    params: &ProbeParams,
    seeds: &[u64],
) -> Result<LayerProbe> {
    params.validate()?;
    if seeds.is_empty() {
        return Err(Error::Parameter("at least one probe seed is required".into()));
    }
    let n_features = features.cols();
    let mut projection = None;
    let projected;
    let features = match params.projection_dim {
        Some(to) if n_features > to => {
            let seed = seeds[0];
            projected = random_projection(features, to, seed)?;
            projection = Some(ProjectionInfo { from: n_features, to, seed });
            &projected
        }
        _ => features,
    };
    params.measure.check_dimension(features.cols())?;
    let data = LabeledDataset::new(features, class_ids.to_vec(), n_classes)?;
    let grid = params.grid.taus()?;

    let runs: Vec<(SparsityCurve, TauEstimate, usize)> = seeds
        .par_iter()
        .map(|&seed| {
            let forest = build_forest(&data, &params.forest, seed)?;
            let dec = decompose(&forest, params.measure)?;
            let curve = sparsity_curve(&dec, &grid)?;
            let estimate = estimate_tau_star(&curve, &params.estimator)?;
            Ok((curve, estimate, dec.nonzero_atom_count()))
        })
        .collect::<Result<_>>()?;

    let clustering = match params.clustering_k {
        Some(k) => Some(cluster_and_score(data.features(), data.class_ids(), k, seeds[0])?),
        None => None,
    };

    let seed_results: Vec<SeedResult> = seeds
        .iter()
        .zip(&runs)
        .map(|(&seed, (_, e, atoms))| SeedResult {
            seed,
            tau_star: e.tau_star,
            alpha_star: e.alpha_star,
            fallback_used: e.fallback_used,
            degenerate: e.degenerate,
            band_size: e.selected.len(),
            nonzero_atoms: *atoms,
        })
        .collect();
    let taus: Vec<f64> = seed_results.iter().map(|s| s.tau_star).collect();
    let alphas: Vec<f64> = seed_results.iter().map(|s| s.alpha_star).collect();
    let summary = LayerSummary {
        name: name.to_string(),
        n_features,
        projection,
        tau_star: Spread::of(&taus),
        alpha_star: Spread::of(&alphas),
        fallback_count: seed_results.iter().filter(|s| s.fallback_used).count(),
        degenerate: seed_results.iter().any(|s| s.degenerate),
        seeds: seed_results,
        clustering,
        curve_files: Vec::new(),
    };
    let (curves, estimates) = runs.into_iter().map(|(c, e, _)| (c, e)).unzip();
    Ok(LayerProbe { summary, curves, estimates })
}

/// Probes every layer in order. Layers run one after another; seeds within
/// a layer run in parallel.
pub fn probe_stack(stack: &LayerStack, params: &ProbeParams, seeds: &[u64]) -> Result<Vec<LayerProbe>> {
    stack.validate()?;
    params.validate()?;
    stack
        .layers
        .iter()
        .map(|layer| probe_layer(&layer.name, &layer.features, &stack.class_ids, stack.n_classes, params, seeds))
        .collect()
}

/// Serialized report of a probe run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub tool: String,
    pub version: String,
    pub settings: String,
    /// Where the stack was read from, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub params: ProbeParams,
    pub seeds: Vec<u64>,
    pub seed_note: String,
    pub n_samples: usize,
    pub n_classes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub layers: Vec<LayerSummary>,
    /// Excluded from determinism comparisons.
    pub wall_time_secs: f64,
}

impl ProbeReport {
    pub fn new(stack: &LayerStack, params: &ProbeParams, seeds: &[u64], layers: &[LayerProbe], wall: f64) -> Self {
        ProbeReport {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            settings: params.settings_line(),
            input: None,
            params: params.clone(),
            seeds: seeds.to_vec(),
            seed_note: SEED_NOTE.into(),
            n_samples: stack.n_samples(),
            n_classes: stack.n_classes,
            provenance: stack.provenance.clone(),
            layers: layers.iter().map(|l| l.summary.clone()).collect(),
            wall_time_secs: wall,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Runs the stack, writes `report_path` and one curve CSV per layer and seed
/// into `<report stem>_curves/` next to it.
pub fn run_and_write(
    stack: &LayerStack,
    params: &ProbeParams,
    seeds: &[u64],
    report_path: &Path,
    input: Option<String>,
) -> Result<ProbeReport> {
    let start = Instant::now();
    let mut layers = probe_stack(stack, params, seeds)?;
    let stem = report_path.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    let parent = report_path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let curve_dir_name = format!("{stem}_curves");
    let curve_dir = parent.join(&curve_dir_name);
    std::fs::create_dir_all(&curve_dir).map_err(|e| Error::io(&curve_dir, e))?;
    for (i, layer) in layers.iter_mut().enumerate() {
        for ((curve, estimate), seed) in layer.curves.iter().zip(&layer.estimates).zip(seeds) {
            let file = format!("{i:02}_{}_seed{seed}.csv", file_stem(&layer.summary.name));
            write_curve_csv(&curve_dir.join(&file), curve, estimate)?;
            layer.summary.curve_files.push(format!("{curve_dir_name}/{file}"));
        }
    }
    let mut report = ProbeReport::new(stack, params, seeds, &layers, start.elapsed().as_secs_f64());
    report.input = input;
    std::fs::write(report_path, report.to_json() + "\n").map_err(|e| Error::io(report_path, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests;
