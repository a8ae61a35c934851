//! Ordered per-layer feature matrices sharing one label vector, and their
//! on-disk manifest layout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::io::{read_labels_i32, read_raw_f32_shaped, write_labels_i32, write_raw_f32};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.i32";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Anything else the producer wants to record.
    #[serde(default, flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub features: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
    pub class_ids: Vec<usize>,
    pub n_classes: usize,
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLayer {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub layers: Vec<ManifestLayer>,
    #[serde(default = "default_labels")]
    pub labels: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

fn default_labels() -> String {
    LABELS_FILE.to_string()
}

impl LayerStack {
    /// Builds a stack, inferring the class count from the largest id when
    /// `n_classes` is `None`.
    pub fn new(layers: Vec<Layer>, class_ids: Vec<usize>, n_classes: Option<usize>) -> Result<Self> {
        let n_classes = n_classes.unwrap_or_else(|| class_ids.iter().max().map_or(0, |m| m + 1));
        let stack = LayerStack { layers, class_ids, n_classes, provenance: None };
        stack.validate()?;
        Ok(stack)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn n_samples(&self) -> usize {
        self.class_ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Validation("layer stack is empty".into()));
        }
        if let Some(&bad) = self.class_ids.iter().find(|&&c| c >= self.n_classes) {
            return Err(Error::Validation(format!("label {bad} out of range for {} classes", self.n_classes)));
        }
        let m = self.n_samples();
        for layer in &self.layers {
            if layer.features.rows() != m {
                return Err(Error::Size(format!(
                    "layer has {} rows but there are {m} labels",
                    layer.features.rows()
                ))
                .in_layer(&layer.name));
            }
        }
        Ok(())
    }

    /// Loads a stack from `manifest.json` (or a directory containing one).
    pub fn load(path: &Path) -> Result<Self> {
        let manifest_path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let dir = manifest_path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
        let class_ids = read_labels_i32(&dir.join(&manifest.labels))?;
        let layers = manifest
            .layers
            .iter()
            .map(|l| {
                let features = read_raw_f32_shaped(&dir.join(&l.file), l.rows, l.cols).map_err(|e| e.in_layer(&l.name))?;
                Ok(Layer { name: l.name.clone(), features })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut stack = LayerStack::new(layers, class_ids, manifest.n_classes)?;
        stack.provenance = manifest.provenance;
        Ok(stack)
    }

    /// Writes one raw file per layer, the label file and `manifest.json`.
    /// Returns the manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let file = format!("layer{i:02}.f32");
            write_raw_f32(&dir.join(&file), &layer.features)?;
            entries.push(ManifestLayer {
                name: layer.name.clone(),
                file,
                rows: layer.features.rows(),
                cols: layer.features.cols(),
            });
        }
        write_labels_i32(&dir.join(LABELS_FILE), &self.class_ids)?;
        let manifest = Manifest {
            layers: entries,
            labels: LABELS_FILE.into(),
            n_classes: Some(self.n_classes),
            provenance: self.provenance.clone(),
        };
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
