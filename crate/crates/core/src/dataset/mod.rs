//! Labeled datasets living in the unit cube `[0,1]^n` with one-hot labels.

pub mod io;
pub mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use synth::{generate, SyntheticKind, SyntheticSpec};

/// Output of [`normalize`]: the rescaled matrix plus the columns that were
/// constant and therefore pinned to 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub matrix: Matrix,
    pub degenerate_columns: Vec<usize>,
}

/// Per-column min-max map onto `[0,1]`. Constant columns become 0.5.
pub fn normalize(raw: &Matrix) -> Result<Normalized> {
    if raw.rows() < 2 {
        return Err(Error::Size(format!("need at least 2 samples, got {}", raw.rows())));
    }
    if let Some((row, col, value)) = raw.find_non_finite() {
        return Err(Error::NonFinite { row, col, value });
    }
    let mut matrix = raw.clone();
    let mut degenerate_columns = Vec::new();
    for c in 0..raw.cols() {
        let (lo, hi) = raw
            .column(c)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if hi > lo {
            let span = hi - lo;
            // Endpoints are mapped exactly so that re-normalizing is a no-op.
            matrix.map_column(c, |v| {
                if v == lo {
                    0.0
                } else if v == hi {
                    1.0
                } else {
                    ((v - lo) / span).clamp(0.0, 1.0)
                }
            });
        } else {
            degenerate_columns.push(c);
            matrix.map_column(c, |_| 0.5);
        }
    }
    Ok(Normalized { matrix, degenerate_columns })
}

/// One-hot encodes class ids into an `(m, n_classes)` matrix.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<Matrix> {
    let mut out = Matrix::zeros(labels.len(), n_classes);
    for (i, &id) in labels.iter().enumerate() {
        if id >= n_classes {
            return Err(Error::Validation(format!(
                "label {id} at row {i} is outside [0, {n_classes})"
            )));
        }
        out.set(i, id, 1.0);
    }
    Ok(out)
}

/// Flattens a sample stored with an arbitrary row-major shape into a vector.
///
/// Row-major storage already is the flat order, so this only checks that the
/// buffer matches the shape.
pub fn unravel(shape: &[usize], data: &[f64]) -> Result<Vec<f64>> {
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(Error::Size(format!(
            "shape {shape:?} holds {expected} values but buffer has {}",
            data.len()
        )));
    }
    Ok(data.to_vec())
}

/// Features normalized into `[0,1]^n` paired with one-hot labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Matrix,
    class_ids: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_names: Option<Vec<String>>,
    #[serde(default)]
    degenerate_columns: Vec<usize>,
}

impl LabeledDataset {
    /// Normalizes `raw` and one-hot encodes `class_ids`.
    pub fn new(raw: &Matrix, class_ids: Vec<usize>, n_classes: usize) -> Result<Self> {
        let Normalized { matrix, degenerate_columns } = normalize(raw)?;
        let mut ds = Self::from_normalized(matrix, class_ids, n_classes)?;
        ds.degenerate_columns = degenerate_columns;
        Ok(ds)
    }

    /// Wraps features that are already inside `[0,1]^n`.
    pub fn from_normalized(features: Matrix, class_ids: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.rows() < 2 {
            return Err(Error::Size(format!("need at least 2 samples, got {}", features.rows())));
        }
        if features.cols() < 1 {
            return Err(Error::Size("need at least one feature column".into()));
        }
        if n_classes < 2 {
            return Err(Error::Validation(format!("need at least 2 classes, got {n_classes}")));
        }
        if class_ids.len() != features.rows() {
            return Err(Error::Size(format!(
                "{} labels for {} samples",
                class_ids.len(),
                features.rows()
            )));
        }
        if let Some((row, col, value)) = features.find_non_finite() {
            return Err(Error::NonFinite { row, col, value });
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation(format!(
                "feature at row {}, column {} is outside [0,1]",
                pos / features.cols(),
                pos % features.cols()
            )));
        }
        let labels = one_hot(&class_ids, n_classes)?;
        Ok(LabeledDataset { features, labels, class_ids, class_names: None, degenerate_columns: Vec::new() })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes() {
            return Err(Error::Validation(format!(
                "{} class names for {} classes",
                names.len(),
                self.n_classes()
            )));
        }
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &Matrix {
        &self.labels
    }

    pub fn class_ids(&self) -> &[usize] {
        &self.class_ids
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn degenerate_columns(&self) -> &[usize] {
        &self.degenerate_columns
    }

    pub fn n_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.cols()
    }
}
