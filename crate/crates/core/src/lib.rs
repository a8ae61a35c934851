//! Sparsity probe: measures how well a labeled point set separates by
//! decomposing variance-minimizing random forests into geometric wavelets and
//! locating the transition index of their τ-sparsity curve.

pub mod clustering;
pub mod dataset;
pub mod error;
pub mod forest;
pub mod matrix;
pub mod oracle;
pub mod probe;
pub mod sparsity;
pub mod wavelet;

pub use error::{Error, ErrorKind, Result};
pub use matrix::Matrix;
