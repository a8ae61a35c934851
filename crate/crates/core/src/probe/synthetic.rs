//! Pseudo-layer stacks with known separability ordering, for checking that
//! the probe ranks layers correctly.
//!
//! Each layer is `(1 − w)·noise + w·clustered`: `noise` is uniform in
//! `[0,1]^n` and independent of the labels, `clustered` puts every class
//! around its own random centroid with small Gaussian jitter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::stack::{Layer, LayerStack, Provenance};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_WEIGHTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoLayerSpec {
    pub m: usize,
    pub n: usize,
    pub n_classes: usize,
    /// Standard deviation of the jitter around each class centroid.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for PseudoLayerSpec {
    fn default() -> Self {
        PseudoLayerSpec { m: 1000, n: 20, n_classes: 4, jitter: 0.05, seed: 0 }
    }
}

struct Base {
    noise: Matrix,
    clustered: Matrix,
    class_ids: Vec<usize>,
}

fn base(spec: &PseudoLayerSpec) -> Result<Base> {
    if spec.m < 2 || spec.n == 0 || spec.n_classes < 2 || !(spec.jitter >= 0.0) {
        return Err(Error::Parameter(format!("invalid pseudo-layer spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let jitter = Normal::new(0.0, spec.jitter).map_err(|e| Error::Parameter(e.to_string()))?;
    let centroids: Vec<Vec<f64>> =
        (0..spec.n_classes).map(|_| (0..spec.n).map(|_| unit.sample(&mut rng)).collect()).collect();
    let class_ids: Vec<usize> = (0..spec.m).map(|i| i % spec.n_classes).collect();
    let mut noise = Matrix::zeros(spec.m, spec.n);
    let mut clustered = Matrix::zeros(spec.m, spec.n);
    for (i, &c) in class_ids.iter().enumerate() {
        for j in 0..spec.n {
            noise.set(i, j, unit.sample(&mut rng));
            clustered.set(i, j, centroids[c][j] + jitter.sample(&mut rng));
        }
    }
    Ok(Base { noise, clustered, class_ids })
}

fn mix(base: &Base, w: f64) -> Matrix {
    let data = base.noise.as_slice().iter().zip(base.clustered.as_slice()).map(|(a, b)| (1.0 - w) * a + w * b).collect();
    Matrix::from_vec(base.noise.rows(), base.noise.cols(), data).expect("same shape")
}

fn provenance(kind: &str, spec: &PseudoLayerSpec) -> Provenance {
    let mut p = Provenance { model: Some(format!("pseudo-layers/{kind}")), seed: Some(spec.seed), ..Default::default() };
    p.extra.insert("spec".into(), serde_json::to_value(spec).expect("spec serializes"));
    p
}

/// One layer per weight, in the given order.
pub fn interpolation_stack(spec: &PseudoLayerSpec, weights: &[f64]) -> Result<LayerStack> {
    if weights.is_empty() || weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::Parameter("interpolation weights must be non-empty and lie in [0,1]".into()));
    }
    let b = base(spec)?;
    let layers =
        weights.iter().enumerate().map(|(i, &w)| Layer { name: format!("layer{i}_w{w}"), features: mix(&b, w) }).collect();
    Ok(LayerStack::new(layers, b.class_ids, Some(spec.n_classes))?.with_provenance(provenance("interpolation", spec)))
}

/// The interpolation stack traversed from clustered back to noise.
pub fn reverse_interpolation_stack(spec: &PseudoLayerSpec, weights: &[f64]) -> Result<LayerStack> {
    let reversed: Vec<f64> = weights.iter().rev().copied().collect();
    let mut stack = interpolation_stack(spec, &reversed)?;
    stack.provenance = Some(provenance("reverse-interpolation", spec));
    Ok(stack)
}

/// Keeps every `stride`-th column and zeroes the rest.
pub fn decimate(x: &Matrix, stride: usize) -> Matrix {
    let mut out = x.clone();
    for j in (0..x.cols()).filter(|j| j % stride != 0) {
        out.map_column(j, |_| 0.0);
    }
    out
}

/// Interpolation stack whose layer `corrupt` is replaced by a decimated copy.
pub fn decimated_stack(spec: &PseudoLayerSpec, weights: &[f64], corrupt: usize, stride: usize) -> Result<LayerStack> {
    if corrupt >= weights.len() || stride < 2 {
        return Err(Error::Parameter(format!(
            "corrupt layer {corrupt} must index one of {} layers and stride must be at least 2",
            weights.len()
        )));
    }
    let mut stack = interpolation_stack(spec, weights)?;
    let layer = &mut stack.layers[corrupt];
    layer.features = decimate(&layer.features, stride);
    layer.name = format!("{}_decimated{stride}", layer.name);
    stack.provenance = Some(provenance("decimated", spec));
    Ok(stack)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_noise_and_clusters() {
        let spec = PseudoLayerSpec { m: 40, n: 3, ..Default::default() };
        let s = interpolation_stack(&spec, &DEFAULT_WEIGHTS).unwrap();
        assert_eq!(s.layers.len(), 5);
        let b = base(&spec).unwrap();
        assert_eq!(s.layers[0].features, b.noise);
        assert_eq!(s.layers[4].features, b.clustered);
        assert_eq!(s.class_ids.iter().filter(|&&c| c == 0).count(), 10);
    }

    #[test]
    fn reverse_and_decimated_variants() {
        let spec = PseudoLayerSpec { m: 20, n: 10, ..Default::default() };
        let fwd = interpolation_stack(&spec, &DEFAULT_WEIGHTS).unwrap();
        let rev = reverse_interpolation_stack(&spec, &DEFAULT_WEIGHTS).unwrap();
        assert_eq!(rev.layers[0].features, fwd.layers[4].features);
        let dec = decimated_stack(&spec, &DEFAULT_WEIGHTS, 2, 5).unwrap();
        let x = &dec.layers[2].features;
        for j in 0..10 {
            let zero = x.column(j).all(|v| v == 0.0);
            assert_eq!(zero, j % 5 != 0, "column {j}");
        }
        assert!(decimated_stack(&spec, &DEFAULT_WEIGHTS, 5, 5).is_err());
    }
}
