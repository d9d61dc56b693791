//! Numerical rank: singular values above a scaled machine-epsilon tolerance.

use crate::error::{Error, Result};
use crate::linalg;
use ndarray::Array2;

/// Rank with the default tolerance factor max(n, d).
pub fn numerical_rank(z: &Array2<f64>) -> Result<usize> {
    numerical_rank_with_tol(z, z.nrows().max(z.ncols()) as f64)
}

/// Count of singular values σ > tol_factor · σ_max · ε_machine.
pub fn numerical_rank_with_tol(z: &Array2<f64>, tol_factor: f64) -> Result<usize> {
    if z.nrows() == 0 || z.ncols() == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("non-finite entries".into()));
    }
    let sv = linalg::singular_values(z);
    let max = sv.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return Ok(0);
    }
    let tol = tol_factor * max * f64::EPSILON;
    Ok(sv.iter().filter(|&&s| s > tol).count())
}
