//! Lloyd's k-means with k-means++ seeding, and the V-measure clustering
//! agreement score (harmonic mean of homogeneity and completeness, β = 1).

use crate::error::{Error, Result};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MAX_ITER: usize = 100;

/// Cluster assignments for `z` (n×d) into k clusters. Deterministic under
/// seed; an emptied cluster is re-seeded at the point farthest from its
/// centroid assignment.
pub fn kmeans(z: &Array2<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = z.nrows();
    if k < 2 {
        return Err(Error::InvalidInput("k must be at least 2".into()));
    }
    if k > n {
        return Err(Error::InvalidInput(format!(
            "k = {k} exceeds sample count {n}"
        )));
    }
    let d = z.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding.
    let mut centers = Array2::<f64>::zeros((k, d));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&z.row(first));
    let mut dist2: Vec<f64> = (0..n).map(|i| row_dist2(z, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = dist2.iter().sum();
        let pick = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in dist2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        centers.row_mut(c).assign(&z.row(pick));
        for i in 0..n {
            let nd = row_dist2(z, i, &centers, c);
            if nd < dist2[i] {
                dist2[i] = nd;
            }
        }
    }

    // Lloyd iterations.
    let mut assign = vec![0usize; n];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dd = row_dist2(z, i, &centers, c);
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((k, d));
        for i in 0..n {
            counts[assign[i]] += 1;
            let mut row = sums.row_mut(assign[i]);
            row += &z.row(i);
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed at the point farthest from its current center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        row_dist2(z, a, &centers, assign[a])
                            .partial_cmp(&row_dist2(z, b, &centers, assign[b]))
                            .unwrap()
                    })
                    .unwrap();
                centers.row_mut(c).assign(&z.row(far));
                changed = true;
            } else {
                for j in 0..d {
                    centers[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(assign)
}

fn row_dist2(z: &Array2<f64>, i: usize, centers: &Array2<f64>, c: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..z.ncols() {
        let delta = z[(i, j)] - centers[(c, j)];
        s += delta * delta;
    }
    s
}

/// Homogeneity, completeness, and their harmonic mean (V-measure). Uses the
/// original conventions: a zero-entropy side scores 1 on its ratio, and
/// V = 0 when homogeneity + completeness = 0.
pub fn homogeneity_completeness_v(
    labels_true: &[usize],
    labels_pred: &[usize],
) -> Result<(f64, f64, f64)> {
    if labels_true.len() != labels_pred.len() || labels_true.is_empty() {
        return Err(Error::InvalidInput("label length mismatch".into()));
    }
    let n = labels_true.len() as f64;
    let kt = labels_true.iter().max().unwrap() + 1;
    let kp = labels_pred.iter().max().unwrap() + 1;
    let mut contingency = vec![vec![0usize; kp]; kt];
    for (&t, &p) in labels_true.iter().zip(labels_pred.iter()) {
        contingency[t][p] += 1;
    }
    let row_sums: Vec<usize> = contingency.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<usize> = (0..kp)
        .map(|j| contingency.iter().map(|r| r[j]).sum())
        .collect();

    let h_true = entropy(&row_sums, n);
    let h_pred = entropy(&col_sums, n);
    // Conditional entropies H(true|pred) and H(pred|true).
    let mut h_true_given_pred = 0.0;
    let mut h_pred_given_true = 0.0;
    for t in 0..kt {
        for p in 0..kp {
            let joint = contingency[t][p] as f64;
            if joint == 0.0 {
                continue;
            }
            let pj = joint / n;
            h_true_given_pred -= pj * (joint / col_sums[p] as f64).ln();
            h_pred_given_true -= pj * (joint / row_sums[t] as f64).ln();
        }
    }
    let homogeneity = if h_true == 0.0 {
        1.0
    } else {
        1.0 - h_true_given_pred / h_true
    };
    let completeness = if h_pred == 0.0 {
        1.0
    } else {
        1.0 - h_pred_given_true / h_pred
    };
    let v = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };
    Ok((homogeneity, completeness, v))
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// V-measure between a k-means clustering of `z` and the labels `g`.
pub fn kmeans_vmeasure(z: &Array2<f64>, g: &[usize], k: usize, seed: u64) -> Result<f64> {
    if g.len() != z.nrows() {
        return Err(Error::InvalidInput("label length mismatch".into()));
    }
    let clusters = kmeans(z, k, seed)?;
    homogeneity_completeness_v(g, &clusters).map(|(_, _, v)| v)
}
