//! Coding-rate objectives: the rate-distortion value of a batch of
//! representations, its class-conditional (mixed-distribution) counterpart,
//! and their exact analytic gradients.
//!
//! Conventions fixed here and used everywhere else in the crate:
//! - row-sample layout: a batch is n×d, rows are samples;
//! - rates are in bits (base-2 logs), so gradients carry a 1/ln 2 factor;
//! - the Gram matrix is taken on whichever side (d×d or n×n) is smaller,
//!   which leaves the value unchanged.

use crate::error::{Error, Result};
use crate::linalg;
use ndarray::{Array1, Array2};
use std::sync::atomic::{AtomicU64, Ordering};

static EIGEN_FALLBACKS: AtomicU64 = AtomicU64::new(0);

/// Number of times the ridged eigenvalue fallback replaced a failed Cholesky
/// factorization since process start. The fallback should essentially never
/// fire (I + PSD is SPD); a nonzero count is a diagnostic worth reporting.
pub fn eigen_fallback_count() -> u64 {
    EIGEN_FALLBACKS.load(Ordering::Relaxed)
}

/// An n×d batch of representation vectors, rows are samples.
#[derive(Debug, Clone)]
pub struct RepresentationBatch {
    data: Array2<f64>,
}

impl RepresentationBatch {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput(
                "representation batch must have at least one row and one column".into(),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "representation batch contains non-finite entries".into(),
            ));
        }
        Ok(Self { data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }
}

/// Row-stochastic membership weights: entry (i, j) is the probability of
/// sample i belonging to class j. Hard labels become one-hot rows; the
/// combined multi-attribute encoding uses rows with entries 0 or 1/N.
#[derive(Debug, Clone)]
pub struct MembershipMatrix {
    weights: Array2<f64>,
}

impl MembershipMatrix {
    /// One-hot memberships from hard class labels.
    pub fn from_hard_labels(labels: &[usize], class_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("empty label vector".into()));
        }
        if class_count == 0 {
            return Err(Error::InvalidInput("class count must be positive".into()));
        }
        let mut weights = Array2::<f64>::zeros((labels.len(), class_count));
        for (i, &c) in labels.iter().enumerate() {
            if c >= class_count {
                return Err(Error::InvalidInput(format!(
                    "label {c} out of range for {class_count} classes"
                )));
            }
            weights[(i, c)] = 1.0;
        }
        Ok(Self { weights })
    }

    /// Soft memberships; each row must sum to 1 with entries in [0, 1].
    pub fn from_soft(weights: Array2<f64>) -> Result<Self> {
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::InvalidInput("empty membership matrix".into()));
        }
        for row in weights.rows() {
            let mut sum = 0.0;
            for &w in row {
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidInput(format!(
                        "membership weight {w} outside [0, 1]"
                    )));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "membership row sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { weights })
    }

    /// Trivial single-class partition (k = 1) over n samples.
    pub fn single_class(n: usize) -> Self {
        Self {
            weights: Array2::<f64>::ones((n.max(1), 1)),
        }
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.weights.ncols()
    }

    /// tr(Π_j): expected number of samples in class j.
    pub fn column_mass(&self, j: usize) -> f64 {
        self.weights.column(j).sum()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }
}

/// Squared allowed distortion ε² of the lossy coding scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precision {
    epsilon_sq: f64,
}

impl Precision {
    pub fn new(epsilon_sq: f64) -> Result<Self> {
        if !epsilon_sq.is_finite() || epsilon_sq <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "squared distortion must be positive and finite, got {epsilon_sq}"
            )));
        }
        Ok(Self { epsilon_sq })
    }

    pub fn epsilon_sq(&self) -> f64 {
        self.epsilon_sq
    }
}

impl Default for Precision {
    /// ε² = 0.5, the common choice in coding-rate work.
    fn default() -> Self {
        Self { epsilon_sq: 0.5 }
    }
}

/// ½·log2 det(I + α·G) for G = ZᵀZ (or the spectrally identical ZZᵀ on the
/// smaller side), computed through a Cholesky factorization.
fn half_logdet2_gram(z: &Array2<f64>, alpha: f64) -> Result<f64> {
    let (n, d) = (z.nrows(), z.ncols());
    let gram = if d <= n {
        z.t().dot(z)
    } else {
        z.dot(&z.t())
    };
    let m = gram.nrows();
    let mut s = gram * alpha;
    for i in 0..m {
        s[(i, i)] += 1.0;
    }
    Ok(0.5 * logdet2_spd(&s)?)
}

/// log2 det of an SPD matrix: Cholesky, with a ridged eigenvalue fallback.
fn logdet2_spd(s: &Array2<f64>) -> Result<f64> {
    if let Some(l) = linalg::cholesky(s) {
        return Ok(linalg::logdet2_from_cholesky(&l));
    }
    EIGEN_FALLBACKS.fetch_add(1, Ordering::Relaxed);
    let m = s.nrows();
    let mut ridged = s.clone();
    for i in 0..m {
        ridged[(i, i)] += 1e-12;
    }
    let eig = linalg::symmetric_eigenvalues(&ridged);
    let max = eig.first().copied().unwrap_or(0.0);
    let min = eig.last().copied().unwrap_or(0.0);
    if min <= 0.0 {
        return Err(Error::Numerical(format!(
            "factorization failed: matrix not positive definite \
             (extreme eigenvalues {min:.3e} .. {max:.3e}, condition {:.3e})",
            max / min.abs().max(1e-300)
        )));
    }
    Ok(eig.iter().map(|l| l.log2()).sum())
}

/// Rate-distortion value R(Z, ε) = ½·log2 det(I + d/(n·ε²)·ZᵀZ), in bits.
pub fn rate(z: &RepresentationBatch, eps: Precision) -> Result<f64> {
    let alpha = z.dim() as f64 / (z.n() as f64 * eps.epsilon_sq());
    half_logdet2_gram(z.data(), alpha)
}

/// Class-conditional rate R^c(Z, ε | Π): membership-weighted sum of the
/// per-class rates, Σ_j tr(Π_j)/(2n) · log2 det(I + d/(tr(Π_j)·ε²)·ZᵀΠ_jZ).
/// Classes are accumulated in index order so the reduction is deterministic.
pub fn rate_mixed(z: &RepresentationBatch, eps: Precision, p: &MembershipMatrix) -> Result<f64> {
    check_membership(z, p)?;
    let (n, d) = (z.n(), z.dim());
    let mut total = 0.0;
    for j in 0..p.class_count() {
        let mass = p.column_mass(j);
        let beta = d as f64 / (mass * eps.epsilon_sq());
        let weighted = weight_rows(z.data(), &p.weights().column(j).to_owned());
        total += mass / (2.0 * n as f64) * 2.0 * half_logdet2_gram(&weighted, beta)?;
    }
    Ok(total)
}

/// Gradient of `rate` with respect to Z:
/// d/(n·ε²·ln 2) · Z·(I + d/(n·ε²)·ZᵀZ)⁻¹, via a symmetric solve.
pub fn grad_rate(z: &RepresentationBatch, eps: Precision) -> Result<Array2<f64>> {
    let (n, d) = (z.n(), z.dim());
    let alpha = d as f64 / (n as f64 * eps.epsilon_sq());
    let coef = alpha / std::f64::consts::LN_2;
    let zm = z.data();
    if d <= n {
        // X = Z·S⁻¹ with S = I_d + α·ZᵀZ, via S·Xᵀ = Zᵀ.
        let s = i_plus_scaled(&zm.t().dot(zm), alpha);
        let xt = spd_solve(&s, &zm.t().to_owned())?;
        Ok(xt.t().to_owned() * coef)
    } else {
        // X = T⁻¹·Z with T = I_n + α·ZZᵀ (push-through identity).
        let t = i_plus_scaled(&zm.dot(&zm.t()), alpha);
        Ok(spd_solve(&t, zm)? * coef)
    }
}

/// Gradient of `rate_mixed` with respect to Z. Row i receives
/// d/(n·ε²·ln 2) · Σ_j π_ij · z_i·(I + d/(tr(Π_j)·ε²)·ZᵀΠ_jZ)⁻¹;
/// the tr(Π_j)/(2n) class weight and the per-class log-det scale cancel
/// into the shared d/(n·ε²·ln 2) coefficient.
pub fn grad_rate_mixed(
    z: &RepresentationBatch,
    eps: Precision,
    p: &MembershipMatrix,
) -> Result<Array2<f64>> {
    check_membership(z, p)?;
    let (n, d) = (z.n(), z.dim());
    let coef = d as f64 / (n as f64 * eps.epsilon_sq() * std::f64::consts::LN_2);
    let zm = z.data();
    let mut grad = Array2::<f64>::zeros((n, d));
    for j in 0..p.class_count() {
        let mass = p.column_mass(j);
        let beta = d as f64 / (mass * eps.epsilon_sq());
        let col = p.weights().column(j).to_owned();
        let weighted = weight_rows(zm, &col);
        let s = i_plus_scaled(&weighted.t().dot(&weighted), beta);
        let xt = spd_solve(&s, &zm.t().to_owned())?;
        let x = xt.t();
        for i in 0..n {
            let w = col[i];
            if w == 0.0 {
                continue;
            }
            for c in 0..d {
                grad[(i, c)] += coef * w * x[(i, c)];
            }
        }
    }
    Ok(grad)
}

/// Central-difference gradient estimate of a scalar function of a matrix.
/// This is the verification oracle for the analytic gradients above; it is
/// exercised only by tests and stays independent of the solve paths.
pub fn fd_check<F>(f: F, z: &Array2<f64>, step: f64) -> Result<Array2<f64>>
where
    F: Fn(&Array2<f64>) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut grad = Array2::<f64>::zeros(z.raw_dim());
    for i in 0..z.nrows() {
        for j in 0..z.ncols() {
            let mut plus = z.clone();
            let mut minus = z.clone();
            plus[(i, j)] += step;
            minus[(i, j)] -= step;
            grad[(i, j)] = (f(&plus)? - f(&minus)?) / (2.0 * step);
        }
    }
    Ok(grad)
}

fn check_membership(z: &RepresentationBatch, p: &MembershipMatrix) -> Result<()> {
    if p.n() != z.n() {
        return Err(Error::InvalidInput(format!(
            "membership rows ({}) do not match batch rows ({})",
            p.n(),
            z.n()
        )));
    }
    for j in 0..p.class_count() {
        if p.column_mass(j) <= 0.0 {
            return Err(Error::DegeneratePartition(format!(
                "class {j} has zero membership mass"
            )));
        }
    }
    Ok(())
}

/// Rows of z scaled by sqrt of the membership weights, so the weighted Gram
/// ZᵀΠZ comes out symmetric by construction.
fn weight_rows(z: &Array2<f64>, weights: &Array1<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let w = weights[i].sqrt();
        row.mapv_inplace(|v| v * w);
    }
    out
}

fn i_plus_scaled(gram: &Array2<f64>, alpha: f64) -> Array2<f64> {
    let mut s = gram * alpha;
    for i in 0..s.nrows() {
        s[(i, i)] += 1.0;
    }
    s
}

/// Solve S·X = B for SPD S; Cholesky with one ridged retry.
fn spd_solve(s: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if let Some(l) = linalg::cholesky(s) {
        return Ok(linalg::cholesky_solve(&l, b));
    }
    EIGEN_FALLBACKS.fetch_add(1, Ordering::Relaxed);
    let mut ridged = s.clone();
    for i in 0..ridged.nrows() {
        ridged[(i, i)] += 1e-12;
    }
    match linalg::cholesky(&ridged) {
        Some(l) => Ok(linalg::cholesky_solve(&l, b)),
        None => {
            let eig = linalg::symmetric_eigenvalues(&ridged);
            let max = eig.first().copied().unwrap_or(0.0);
            let min = eig.last().copied().unwrap_or(0.0);
            Err(Error::Numerical(format!(
                "symmetric solve failed even with ridge \
                 (extreme eigenvalues {min:.3e} .. {max:.3e})"
            )))
        }
    }
}
