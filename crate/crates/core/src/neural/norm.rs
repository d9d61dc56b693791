//! Sphere-projecting output normalization: mean-center a vector and rescale
//! it to a fixed radius, so every sample carries the same magnitude into the
//! rate objectives. This is layer normalization without learnable affine
//! parameters.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1};

/// r·(z − mean(z)) / ‖z − mean(z)‖₂.
pub fn sphere_norm(z: ArrayView1<'_, f64>, radius: f64) -> Result<Array1<f64>> {
    let d = z.len();
    if d == 0 {
        return Err(Error::InvalidInput("empty vector".into()));
    }
    let mean = z.sum() / d as f64;
    let centered = z.mapv(|v| v - mean);
    let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateInput(
            "sphere normalization of a constant vector".into(),
        ));
    }
    Ok(centered * (radius / norm))
}

/// Per-row state cached by the batch forward pass, enough to apply the
/// normalization Jacobian in the backward pass.
#[derive(Debug, Clone)]
pub struct SphereCache {
    pub(crate) unit: Array2<f64>,  // (z - mean)/‖z - mean‖ per row
    pub(crate) norms: Array1<f64>, // ‖z - mean‖ per row
    pub(crate) radius: f64,
}

/// Row-wise sphere normalization of a batch; returns outputs plus cache.
pub(crate) fn sphere_norm_batch(z: &Array2<f64>, radius: f64) -> Result<(Array2<f64>, SphereCache)> {
    let (n, d) = (z.nrows(), z.ncols());
    let mut out = Array2::<f64>::zeros((n, d));
    let mut unit = Array2::<f64>::zeros((n, d));
    let mut norms = Array1::<f64>::zeros(n);
    for i in 0..n {
        let row = z.row(i);
        let mean = row.sum() / d as f64;
        let mut sq = 0.0;
        for j in 0..d {
            let c = row[j] - mean;
            unit[(i, j)] = c;
            sq += c * c;
        }
        let norm = sq.sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateInput(format!(
                "sphere normalization of a constant vector (row {i})"
            )));
        }
        norms[i] = norm;
        for j in 0..d {
            unit[(i, j)] /= norm;
            out[(i, j)] = radius * unit[(i, j)];
        }
    }
    Ok((out, SphereCache { unit, norms, radius }))
}

/// Backward through the row-wise normalization. For one row with centered
/// unit u and pre-norm length m, the Jacobian action on upstream g is
/// (r/m)·(g − (u·g)·u) followed by re-centering.
pub(crate) fn sphere_norm_backward(cache: &SphereCache, upstream: &Array2<f64>) -> Array2<f64> {
    let (n, d) = (upstream.nrows(), upstream.ncols());
    let mut out = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        let scale = cache.radius / cache.norms[i];
        let mut dot = 0.0;
        for j in 0..d {
            dot += cache.unit[(i, j)] * upstream[(i, j)];
        }
        let mut mean = 0.0;
        for j in 0..d {
            let v = scale * (upstream[(i, j)] - dot * cache.unit[(i, j)]);
            out[(i, j)] = v;
            mean += v;
        }
        mean /= d as f64;
        for j in 0..d {
            out[(i, j)] -= mean;
        }
    }
    out
}
