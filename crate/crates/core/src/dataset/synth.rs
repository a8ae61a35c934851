//! Seeded generators for the two-dimensional toy datasets and the
//! disjoint-cluster stress case.
//!
//! Parametric forms (all before min-max normalization):
//!
//! * **Spiral**: arm `c ∈ {0,1}` is `r(t)·(cos(t + cπ), sin(t + cπ))` with
//!   `t = 2π·turns·√u`, `u ~ U(0,1)` and `r(t) = t / (2π·turns)`, plus
//!   isotropic Gaussian noise of standard deviation `noise`.
//! * **Circles**: class 0 on the circle of radius `inner_radius`, class 1 on
//!   the unit circle, uniform angles, plus Gaussian noise.
//! * **Gaussian quantiles**: standard normal points in `n_features`
//!   dimensions, split into `n_classes` equally populated shells by radius.
//! * **Disjoint clusters**: `n_clusters` isotropic blobs with centers uniform
//!   in `[-10,10]^2`, per-blob std uniform in `std_range`, and a random
//!   binary label per blob.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_SAMPLES: usize = 1000;
pub const SPIRAL_NOISE: f64 = 0.03;
pub const SPIRAL_TURNS: f64 = 1.5;
pub const CIRCLES_NOISE: f64 = 0.05;
pub const CIRCLES_INNER_RADIUS: f64 = 0.5;
pub const CLUSTERS_COUNT: usize = 20;
pub const CLUSTERS_STD_RANGE: (f64, f64) = (0.2, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    Spiral { turns: f64 },
    Circles { inner_radius: f64 },
    GaussianQuantiles { n_features: usize, n_classes: usize },
    DisjointClusters { n_clusters: usize, std_min: f64, std_max: f64 },
}

impl SyntheticKind {
    pub fn spiral() -> Self {
        SyntheticKind::Spiral { turns: SPIRAL_TURNS }
    }

    pub fn circles() -> Self {
        SyntheticKind::Circles { inner_radius: CIRCLES_INNER_RADIUS }
    }

    pub fn gaussian_quantiles() -> Self {
        SyntheticKind::GaussianQuantiles { n_features: 2, n_classes: 2 }
    }

    pub fn disjoint_clusters() -> Self {
        SyntheticKind::DisjointClusters {
            n_clusters: CLUSTERS_COUNT,
            std_min: CLUSTERS_STD_RANGE.0,
            std_max: CLUSTERS_STD_RANGE.1,
        }
    }

    /// Parses the short names used on the command line.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "spiral" => Ok(Self::spiral()),
            "circles" => Ok(Self::circles()),
            "gq" | "gaussian-quantiles" | "gaussian_quantiles" => Ok(Self::gaussian_quantiles()),
            "clusters" | "disjoint-clusters" | "disjoint_clusters" => Ok(Self::disjoint_clusters()),
            other => Err(Error::Config(format!("unknown synthetic dataset kind `{other}`"))),
        }
    }

    /// Noise level used when none is given.
    pub fn default_noise(&self) -> f64 {
        match self {
            SyntheticKind::Spiral { .. } => SPIRAL_NOISE,
            SyntheticKind::Circles { .. } => CIRCLES_NOISE,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub kind: SyntheticKind,
    pub m: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Spec with the documented default sample count and noise for `kind`.
    pub fn new(kind: SyntheticKind, seed: u64) -> Self {
        SyntheticSpec { kind, m: DEFAULT_SAMPLES, noise: kind.default_noise(), seed }
    }

    pub fn with_samples(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Parameter(format!("sample count must be at least 2, got {}", self.m)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Parameter(format!("noise must be finite and non-negative, got {}", self.noise)));
        }
        match self.kind {
            SyntheticKind::Spiral { turns } if !(turns > 0.0 && turns.is_finite()) => {
                Err(Error::Parameter(format!("spiral turns must be positive, got {turns}")))
            }
            SyntheticKind::Circles { inner_radius } if !(inner_radius > 0.0 && inner_radius < 1.0) => {
                Err(Error::Parameter(format!("inner radius must lie in (0,1), got {inner_radius}")))
            }
            SyntheticKind::GaussianQuantiles { n_features, n_classes }
                if n_features == 0 || n_classes < 2 || n_classes > self.m =>
            {
                Err(Error::Parameter("gaussian quantiles need n_features >= 1 and 2 <= n_classes <= m".into()))
            }
            SyntheticKind::DisjointClusters { n_clusters, std_min, std_max }
                if n_clusters == 0 || !(0.0 < std_min && std_min <= std_max) =>
            {
                Err(Error::Parameter("disjoint clusters need n_clusters >= 1 and 0 < std_min <= std_max".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Raw (un-normalized) coordinates and class ids of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub features: Matrix,
    pub class_ids: Vec<usize>,
    pub n_classes: usize,
}

/// Generates the dataset and normalizes it into the unit cube.
pub fn generate(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    let raw = generate_raw(spec)?;
    LabeledDataset::new(&raw.features, raw.class_ids, raw.n_classes)
}

/// Generates the dataset in its native coordinates.
pub fn generate_raw(spec: &SyntheticSpec) -> Result<RawSample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = spec.m;
    let sample = match spec.kind {
        SyntheticKind::Spiral { turns } => {
            let t_max = 2.0 * PI * turns;
            let mut rows = Vec::with_capacity(m);
            let mut ids = Vec::with_capacity(m);
            for i in 0..m {
                let class = usize::from(i >= m.div_ceil(2));
                let t = t_max * rng.random::<f64>().sqrt();
                let r = t / t_max;
                let phase = t + class as f64 * PI;
                let (nx, ny) = gaussian_pair(&mut rng, spec.noise);
                rows.push([r * phase.cos() + nx, r * phase.sin() + ny]);
                ids.push(class);
            }
            RawSample { features: Matrix::from_rows(&rows)?, class_ids: ids, n_classes: 2 }
        }
        SyntheticKind::Circles { inner_radius } => {
            let mut rows = Vec::with_capacity(m);
            let mut ids = Vec::with_capacity(m);
            for i in 0..m {
                let class = usize::from(i >= m.div_ceil(2));
                let radius = if class == 0 { inner_radius } else { 1.0 };
                let angle = 2.0 * PI * rng.random::<f64>();
                let (nx, ny) = gaussian_pair(&mut rng, spec.noise);
                rows.push([radius * angle.cos() + nx, radius * angle.sin() + ny]);
                ids.push(class);
            }
            RawSample { features: Matrix::from_rows(&rows)?, class_ids: ids, n_classes: 2 }
        }
        SyntheticKind::GaussianQuantiles { n_features, n_classes } => {
            let mut points: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n_features).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect();
            let mut order: Vec<usize> = (0..m).collect();
            let radius2: Vec<f64> = points.iter().map(|p| p.iter().map(|v| v * v).sum()).collect();
            order.sort_by(|&a, &b| radius2[a].total_cmp(&radius2[b]).then(a.cmp(&b)));
            let mut ids = vec![0; m];
            for (rank, &idx) in order.iter().enumerate() {
                ids[idx] = rank * n_classes / m;
            }
            if spec.noise > 0.0 {
                for p in &mut points {
                    for v in p.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v += spec.noise * z;
                    }
                }
            }
            RawSample { features: Matrix::from_rows(&points)?, class_ids: ids, n_classes }
        }
        SyntheticKind::DisjointClusters { n_clusters, std_min, std_max } => {
            let centers: Vec<[f64; 2]> = (0..n_clusters)
                .map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
                .collect();
            let stds: Vec<f64> = (0..n_clusters)
                .map(|_| if std_max > std_min { rng.random_range(std_min..std_max) } else { std_min })
                .collect();
            let mut cluster_labels: Vec<usize> = (0..n_clusters).map(|_| rng.random_range(0..2)).collect();
            // Both classes must be present.
            if n_clusters >= 2 && cluster_labels.iter().all(|&l| l == cluster_labels[0]) {
                cluster_labels[n_clusters - 1] = 1 - cluster_labels[0];
            }
            let mut rows = Vec::with_capacity(m);
            let mut ids = Vec::with_capacity(m);
            for i in 0..m {
                let c = i % n_clusters;
                let (nx, ny) = gaussian_pair(&mut rng, stds[c]);
                rows.push([centers[c][0] + nx, centers[c][1] + ny]);
                ids.push(cluster_labels[c]);
            }
            RawSample { features: Matrix::from_rows(&rows)?, class_ids: ids, n_classes: 2 }
        }
    };
    Ok(sample)
}

fn gaussian_pair(rng: &mut ChaCha8Rng, std: f64) -> (f64, f64) {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    (std * a, std * b)
}
