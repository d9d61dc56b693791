//! Dense symmetric/triangular kernels backing the rate objectives and the
//! rank estimator. Everything here works on small square factors (at most
//! min(n, d) per Gram side), so straightforward O(m^3) loops are fine.

use ndarray::Array2;

/// Cholesky factorization A = L·Lᵀ of a symmetric positive-definite matrix.
/// Returns the lower factor, or `None` when a pivot fails to be positive
/// (matrix not numerically SPD).
pub(crate) fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let m = a.nrows();
    debug_assert_eq!(m, a.ncols());
    let mut l = Array2::<f64>::zeros((m, m));
    for j in 0..m {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !diag.is_finite() || diag <= 0.0 {
            return None;
        }
        let root = diag.sqrt();
        l[(j, j)] = root;
        for i in (j + 1)..m {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / root;
        }
    }
    Some(l)
}

/// log2 det(A) from the lower Cholesky factor of A.
pub(crate) fn logdet2_from_cholesky(l: &Array2<f64>) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].log2()).sum::<f64>()
}

/// Solves A·X = B for X given the lower Cholesky factor L of A (A = L·Lᵀ).
/// B is m×c; forward substitution then back substitution, column by column.
pub(crate) fn cholesky_solve(l: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let m = l.nrows();
    let c = b.ncols();
    debug_assert_eq!(m, b.nrows());
    let mut x = b.clone();
    for col in 0..c {
        // L y = b
        for i in 0..m {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
        // Lᵀ x = y
        for i in (0..m).rev() {
            let mut s = x[(i, col)];
            for k in (i + 1)..m {
                s -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    x
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method,
/// sorted descending.
pub(crate) fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let m = a.nrows();
    debug_assert_eq!(m, a.ncols());
    let mut w = a.clone();
    if m == 1 {
        return vec![w[(0, 0)]];
    }
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..m {
            for q in (p + 1)..m {
                off += w[(p, q)] * w[(p, q)];
            }
        }
        let scale: f64 = (0..m).map(|i| w[(i, i)].abs()).fold(1e-300, f64::max);
        if off.sqrt() <= 1e-14 * scale * m as f64 {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = w[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
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
        }
    }
    let mut eig: Vec<f64> = (0..m).map(|i| w[(i, i)]).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eig
}

/// Upper-triangular R factor (values only) of a tall matrix a (n ≥ d),
/// computed with Householder reflections. Singular values of R equal
/// those of a.
fn householder_r(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let d = a.ncols();
    debug_assert!(n >= d);
    let mut w = a.clone();
    for j in 0..d {
        let mut norm2 = 0.0;
        for i in j..n {
            norm2 += w[(i, j)] * w[(i, j)];
        }
        let norm = norm2.sqrt();
        if norm <= 1e-300 {
            continue;
        }
        let alpha = if w[(j, j)] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0f64; n - j];
        v[0] = w[(j, j)] - alpha;
        for i in (j + 1)..n {
            v[i - j] = w[(i, j)];
        }
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 <= 1e-300 {
            continue;
        }
        for col in j..d {
            let mut dot = 0.0;
            for i in j..n {
                dot += v[i - j] * w[(i, col)];
            }
            let f = 2.0 * dot / vnorm2;
            for i in j..n {
                w[(i, col)] -= f * v[i - j];
            }
        }
    }
    let mut r = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in i..d {
            r[(i, j)] = w[(i, j)];
        }
    }
    r
}

/// Singular values, sorted descending, via QR reduction followed by
/// one-sided Jacobi orthogonalization of the square factor. One-sided
/// Jacobi retains high relative accuracy for the small singular values
/// that rank decisions hinge on.
pub(crate) fn singular_values(a: &Array2<f64>) -> Vec<f64> {
    let (n, d) = (a.nrows(), a.ncols());
    if n == 0 || d == 0 {
        return Vec::new();
    }
    let square = if n >= d {
        householder_r(a)
    } else {
        householder_r(&a.t().to_owned())
    };
    one_sided_jacobi_values(square)
}

fn one_sided_jacobi_values(mut w: Array2<f64>) -> Vec<f64> {
    let m = w.ncols();
    let rows = w.nrows();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..rows {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if apq.abs() <= 1e-30 * (app * aqq).sqrt().max(1e-300) {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..m)
        .map(|j| (0..rows).map(|i| w[(i, j)] * w[(i, j)]).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}
