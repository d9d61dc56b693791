//! Membership-matrix construction for training batches, including the two
//! multi-attribute encodings.

use crate::error::{Error, Result};
use crate::rate::MembershipMatrix;
use ndarray::Array2;

/// Hard-label membership over a batch. Classes absent from the batch are
/// dropped (their R^c term is skipped); the second return value counts how
/// many were dropped.
pub(crate) fn batch_membership(
    labels: &[usize],
    class_count: usize,
) -> Result<(MembershipMatrix, u64)> {
    let mut counts = vec![0usize; class_count];
    for &l in labels {
        if l >= class_count {
            return Err(Error::InvalidInput(format!(
                "label {l} out of range for {class_count} classes"
            )));
        }
        counts[l] += 1;
    }
    let present: Vec<usize> = (0..class_count).filter(|&c| counts[c] > 0).collect();
    let skipped = (class_count - present.len()) as u64;
    let mut remap = vec![usize::MAX; class_count];
    for (new, &old) in present.iter().enumerate() {
        remap[old] = new;
    }
    let remapped: Vec<usize> = labels.iter().map(|&l| remap[l]).collect();
    let membership = MembershipMatrix::from_hard_labels(&remapped, present.len())?;
    Ok((membership, skipped))
}

/// One membership matrix per protected attribute.
pub fn n_partition_memberships(
    attrs: &[Vec<usize>],
    class_counts: &[usize],
) -> Result<Vec<MembershipMatrix>> {
    if attrs.len() != class_counts.len() {
        return Err(Error::InvalidInput(
            "attribute/class-count length mismatch".into(),
        ));
    }
    attrs
        .iter()
        .zip(class_counts)
        .map(|(labels, &k)| MembershipMatrix::from_hard_labels(labels, k))
        .collect()
}

/// Combined single-partition encoding of N protected attributes: the one-hot
/// vectors of each attribute are concatenated and scaled by 1/N, so each row
/// sums to 1 with entries in {0, 1/N}.
pub fn one_partition_membership(
    attrs: &[Vec<usize>],
    class_counts: &[usize],
) -> Result<MembershipMatrix> {
    if attrs.is_empty() {
        return Err(Error::InvalidInput("no protected attributes".into()));
    }
    if attrs.len() != class_counts.len() {
        return Err(Error::InvalidInput(
            "attribute/class-count length mismatch".into(),
        ));
    }
    let n = attrs[0].len();
    if attrs.iter().any(|a| a.len() != n) {
        return Err(Error::InvalidInput(
            "protected attributes have different lengths".into(),
        ));
    }
    let total_classes: usize = class_counts.iter().sum();
    let weight = 1.0 / attrs.len() as f64;
    let mut weights = Array2::<f64>::zeros((n, total_classes));
    let mut offset = 0;
    for (attr, &k) in attrs.iter().zip(class_counts) {
        for (i, &label) in attr.iter().enumerate() {
            if label >= k {
                return Err(Error::InvalidInput(format!(
                    "label {label} out of range for {k} classes"
                )));
            }
            weights[(i, offset + label)] = weight;
        }
        offset += k;
    }
    MembershipMatrix::from_soft(weights)
}

/// Batch variant of the combined encoding: columns for classes absent from
/// the batch are dropped and counted, mirroring `batch_membership`.
pub(crate) fn one_partition_batch(
    attrs: &[Vec<usize>],
    class_counts: &[usize],
) -> Result<(MembershipMatrix, u64)> {
    let full = one_partition_membership(attrs, class_counts)?;
    let weights = full.weights();
    let present: Vec<usize> = (0..weights.ncols())
        .filter(|&j| weights.column(j).sum() > 0.0)
        .collect();
    let skipped = (weights.ncols() - present.len()) as u64;
    if skipped == 0 {
        return Ok((full, 0));
    }
    let reduced = weights.select(ndarray::Axis(1), &present);
    // Dropping empty columns does not disturb any row sum.
    Ok((MembershipMatrix::from_soft(reduced)?, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_partition_rows_sum_to_one_with_half_entries() {
        let g1 = vec![0usize, 1, 0, 1];
        let g2 = vec![1usize, 1, 0, 0];
        let m = one_partition_membership(&[g1, g2], &[2, 2]).unwrap();
        assert_eq!(m.class_count(), 4);
        for row in m.weights().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            for &v in row {
                assert!(v == 0.0 || (v - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_partition_with_single_attribute_is_one_hot() {
        let g = vec![0usize, 1, 1];
        let m = one_partition_membership(&[g.clone()], &[2]).unwrap();
        let hard = MembershipMatrix::from_hard_labels(&g, 2).unwrap();
        assert_eq!(m.weights(), hard.weights());
    }

    #[test]
    fn batch_membership_drops_missing_classes() {
        let (m, skipped) = batch_membership(&[2, 2, 0], 3).unwrap();
        assert_eq!(skipped, 1);
        assert_eq!(m.class_count(), 2);
        assert!((m.column_mass(0) - 1.0).abs() < 1e-12); // class 0
        assert!((m.column_mass(1) - 2.0).abs() < 1e-12); // class 2
    }

    #[test]
    fn mismatched_attribute_lengths_are_rejected() {
        let g1 = vec![0usize, 1];
        let g2 = vec![0usize, 1, 0];
        assert!(one_partition_membership(&[g1, g2], &[2, 2]).is_err());
    }
}
