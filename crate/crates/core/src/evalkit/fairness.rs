//! Group-fairness metrics of a classifier's predictions with respect to a
//! binary protected attribute.

use crate::error::{Error, Result};

/// Per-class true-positive-rate gaps between the two protected groups.
#[derive(Debug, Clone)]
pub struct TprGapReport {
    /// Gap_y = TPR(group 1, y) − TPR(group 0, y), indexed by target class.
    pub gaps: Vec<f64>,
    /// Root mean square of the per-class gaps.
    pub gap_rms: f64,
    /// Classes where one group had no true samples; TPR was taken as 0.
    pub undefined_cells: Vec<bool>,
}

fn check_binary(g: &[usize]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::InvalidInput("empty protected labels".into()));
    }
    if g.iter().any(|&v| v > 1) {
        return Err(Error::InvalidInput(
            "protected attribute must be binary (labels 0/1)".into(),
        ));
    }
    if !g.contains(&0) || !g.contains(&1) {
        return Err(Error::InvalidInput(
            "both protected groups must be present".into(),
        ));
    }
    Ok(())
}

/// True-positive-rate gap per target class plus the RMS aggregate.
/// TPR(g, y) = P(ŷ = y | group g, true class y); a (group, class) cell with
/// no true samples contributes TPR = 0 and is flagged.
pub fn tpr_gap(y_true: &[usize], y_pred: &[usize], g: &[usize]) -> Result<TprGapReport> {
    if y_true.len() != y_pred.len() || y_true.len() != g.len() {
        return Err(Error::InvalidInput("metric input length mismatch".into()));
    }
    check_binary(g)?;
    let classes = y_true
        .iter()
        .chain(y_pred.iter())
        .max()
        .map(|&m| m + 1)
        .unwrap_or(0);
    let mut hits = [vec![0usize; classes], vec![0usize; classes]];
    let mut totals = [vec![0usize; classes], vec![0usize; classes]];
    for i in 0..y_true.len() {
        totals[g[i]][y_true[i]] += 1;
        if y_pred[i] == y_true[i] {
            hits[g[i]][y_true[i]] += 1;
        }
    }
    let mut gaps = Vec::with_capacity(classes);
    let mut undefined = Vec::with_capacity(classes);
    let mut sq_sum = 0.0;
    for c in 0..classes {
        let mut tpr = [0.0f64; 2];
        let mut flagged = false;
        for group in 0..2 {
            if totals[group][c] == 0 {
                flagged = true;
            } else {
                tpr[group] = hits[group][c] as f64 / totals[group][c] as f64;
            }
        }
        let gap = tpr[1] - tpr[0];
        sq_sum += gap * gap;
        gaps.push(gap);
        undefined.push(flagged);
    }
    Ok(TprGapReport {
        gap_rms: (sq_sum / classes as f64).sqrt(),
        gaps,
        undefined_cells: undefined,
    })
}

/// Demographic parity: Σ_y |p(ŷ = y | g = 1) − p(ŷ = y | g = 0)| with
/// empirical frequencies.
pub fn demographic_parity(y_pred: &[usize], g: &[usize]) -> Result<f64> {
    if y_pred.len() != g.len() {
        return Err(Error::InvalidInput("metric input length mismatch".into()));
    }
    check_binary(g)?;
    let classes = y_pred.iter().max().map(|&m| m + 1).unwrap_or(0);
    let mut counts = [vec![0usize; classes], vec![0usize; classes]];
    let mut group_sizes = [0usize; 2];
    for i in 0..y_pred.len() {
        counts[g[i]][y_pred[i]] += 1;
        group_sizes[g[i]] += 1;
    }
    let mut dp = 0.0;
    for c in 0..classes {
        let p1 = counts[1][c] as f64 / group_sizes[1] as f64;
        let p0 = counts[0][c] as f64 / group_sizes[0] as f64;
        dp += (p1 - p0).abs();
    }
    Ok(dp)
}
