//! On-disk formats: CSV with a `label` column, and raw little-endian `f32`
//! matrices with a JSON sidecar plus an `i32` label file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const LABEL_COLUMN: &str = "label";

/// Contents of a CSV dataset before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub feature_names: Vec<String>,
    pub features: Matrix,
    pub class_ids: Vec<usize>,
}

pub fn read_csv(path: &Path) -> Result<CsvData> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == LABEL_COLUMN)
        .ok_or_else(|| Error::format(path, "missing `label` column"))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_col)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    let mut data = Vec::new();
    let mut class_ids = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        for (col, field) in record.iter().enumerate() {
            let field = field.trim();
            if col == label_col {
                let id: i64 = field.parse().map_err(|_| {
                    Error::Validation(format!("row {row}: label `{field}` is not an integer"))
                })?;
                if id < 0 {
                    return Err(Error::Validation(format!("row {row}: negative label {id}")));
                }
                class_ids.push(id as usize);
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Validation(format!("row {row}, column {col}: `{field}` is not a number"))
                })?;
                data.push(v);
            }
        }
    }
    let features = Matrix::from_vec(class_ids.len(), feature_names.len(), data)?;
    Ok(CsvData { feature_names, features, class_ids })
}

pub fn write_csv(path: &Path, features: &Matrix, class_ids: &[usize]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = (0..features.cols()).map(|c| format!("x{c}")).collect();
    header.push(LABEL_COLUMN.to_string());
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (r, id) in class_ids.iter().enumerate() {
        let mut record: Vec<String> = features.row(r).iter().map(|v| format!("{v:?}")).collect();
        record.push(id.to_string());
        writer.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

/// JSON sidecar describing a raw matrix file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMeta {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub order: String,
}

impl RawMeta {
    pub fn f32_row_major(rows: usize, cols: usize) -> Self {
        RawMeta { rows, cols, dtype: "f32".into(), order: "row-major".into() }
    }
}

/// Sidecar path for a raw matrix file: `<file>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the matrix as row-major little-endian `f32` and its sidecar.
pub fn write_raw_f32(path: &Path, matrix: &Matrix) -> Result<()> {
    let bytes: Vec<u8> = matrix.as_slice().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let meta = RawMeta::f32_row_major(matrix.rows(), matrix.cols());
    let sidecar = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))
}

/// Reads a raw matrix using its sidecar for the shape.
pub fn read_raw_f32(path: &Path) -> Result<Matrix> {
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let meta: RawMeta = serde_json::from_str(&text).map_err(|e| Error::format(&sidecar, e.to_string()))?;
    if meta.dtype != "f32" || meta.order != "row-major" {
        return Err(Error::format(
            &sidecar,
            format!("unsupported layout dtype={} order={}", meta.dtype, meta.order),
        ));
    }
    read_raw_f32_shaped(path, meta.rows, meta.cols)
}

/// Reads a raw matrix whose shape is known from elsewhere (e.g. a manifest).
pub fn read_raw_f32_shaped(path: &Path, rows: usize, cols: usize) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = rows * cols * 4;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} bytes for {rows}x{cols} f32, found {}", bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn write_labels_i32(path: &Path, class_ids: &[usize]) -> Result<()> {
    let mut bytes = Vec::with_capacity(class_ids.len() * 4);
    for &id in class_ids {
        let id = i32::try_from(id).map_err(|_| Error::Validation(format!("label {id} overflows i32")))?;
        bytes.extend_from_slice(&id.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_labels_i32(path: &Path) -> Result<Vec<usize>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(path, format!("length {} is not a multiple of 4", bytes.len())));
    }
    bytes
        .chunks_exact(4)
        .enumerate()
        .map(|(i, c)| {
            let v = i32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            usize::try_from(v).map_err(|_| Error::Validation(format!("row {i}: negative label {v}")))
        })
        .collect()
}
