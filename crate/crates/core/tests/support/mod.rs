//! Shared oracle helpers for the integration suites. Everything here is
//! deliberately written as straight-line reference code, independent of the
//! library's factorization paths.
//!
//! Compiled separately into every test binary, so not every binary uses
//! every helper.
#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Classical Jacobi eigenvalue iteration (largest off-diagonal pivot each
/// rotation) for a symmetric matrix. Different pivoting strategy and code
/// path from the library's cyclic-sweep solver.
pub fn reference_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let m = a.nrows();
    assert_eq!(m, a.ncols());
    let mut w = a.clone();
    for _ in 0..20_000 {
        // Largest |off-diagonal| element.
        let (mut p, mut q, mut best) = (0usize, 1usize, 0.0f64);
        for i in 0..m {
            for j in (i + 1)..m {
                if w[(i, j)].abs() > best {
                    best = w[(i, j)].abs();
                    p = i;
                    q = j;
                }
            }
        }
        if best < 1e-13 {
            break;
        }
        let theta = 0.5 * (w[(q, q)] - w[(p, p)]) / w[(p, q)];
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        for k in 0..m {
            let wkp = w[(k, p)];
            let wkq = w[(k, q)];
            w[(k, p)] = c * wkp - s * wkq;
            w[(k, q)] = s * wkp + c * wkq;
        }
        for k in 0..m {
            let wpk = w[(p, k)];
            let wqk = w[(q, k)];
            w[(p, k)] = c * wpk - s * wqk;
            w[(q, k)] = s * wpk + c * wqk;
        }
    }
    let mut eig: Vec<f64> = (0..m).map(|i| w[(i, i)]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eig
}

/// Reference rate evaluation: eigenvalues of I + α·ZᵀZ through the classical
/// Jacobi solver, summed as ½·Σ log2 λ.
pub fn reference_rate(z: &Array2<f64>, epsilon_sq: f64) -> f64 {
    let (n, d) = (z.nrows(), z.ncols());
    let alpha = d as f64 / (n as f64 * epsilon_sq);
    let gram = z.t().dot(z);
    let mut s = gram * alpha;
    for i in 0..d {
        s[(i, i)] += 1.0;
    }
    reference_eigenvalues(&s)
        .iter()
        .map(|l| 0.5 * l.log2())
        .sum()
}

/// Per-class reference for the mixed rate with hard labels: split rows by
/// label and push each class through `reference_rate` machinery directly.
pub fn reference_rate_mixed_hard(z: &Array2<f64>, labels: &[usize], epsilon_sq: f64) -> f64 {
    let n = z.nrows();
    let d = z.ncols();
    let k = labels.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for class in 0..k {
        let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if rows.is_empty() {
            continue;
        }
        let zj = z.select(ndarray::Axis(0), &rows);
        let nj = rows.len() as f64;
        let alpha = d as f64 / (nj * epsilon_sq);
        let gram = zj.t().dot(&zj);
        let mut s = gram * alpha;
        for i in 0..d {
            s[(i, i)] += 1.0;
        }
        let logdet: f64 = reference_eigenvalues(&s).iter().map(|l| l.log2()).sum();
        total += nj / (2.0 * n as f64) * logdet;
    }
    total
}

pub fn seeded_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
}

pub fn seeded_labels(n: usize, classes: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Guarantee every class appears.
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    for c in 0..classes.min(n) {
        labels[c] = c;
    }
    labels
}

/// Largest relative deviation between two matrices, scaled by the larger
/// magnitude entry (floored to avoid 0/0).
pub fn max_relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let scale = a
        .iter()
        .chain(b.iter())
        .map(|v| v.abs())
        .fold(1e-12, f64::max);
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}
