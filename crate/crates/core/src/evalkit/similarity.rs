//! Pair-similarity evaluation: cosine similarity of word pairs against gold
//! scores, compared by Spearman rank correlation with average-rank ties.

use crate::data::EmbeddingTable;
use crate::error::{Error, Result};
use ndarray::ArrayView1;

/// Cosine similarity; zero-norm inputs are degenerate.
pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput("vector length mismatch".into()));
    }
    let dot = a.dot(&b);
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateInput("zero-norm vector".into()));
    }
    Ok(dot / (na * nb))
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput("length mismatch".into()));
    }
    if a.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two observations".into(),
        ));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let mean_a = ra.iter().sum::<f64>() / n;
    let mean_b = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..a.len() {
        let da = ra[i] - mean_a;
        let db = rb[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::DegenerateInput(
            "constant ranks have no correlation".into(),
        ));
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// Outcome of evaluating gold-scored word pairs against embedding cosines.
#[derive(Debug, Clone)]
pub struct SimilarityEval {
    pub spearman: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

/// Cosine similarity per (word, word, gold) triple, then Spearman against
/// the gold scores. Pairs with a missing word (or a zero vector) are skipped
/// and counted; an evaluation with no usable pairs is invalid.
pub fn pair_similarity_eval(
    table: &EmbeddingTable,
    pairs: &[(String, String, f64)],
) -> Result<SimilarityEval> {
    let mut gold = Vec::new();
    let mut cos = Vec::new();
    let mut skipped = 0usize;
    for (w1, w2, score) in pairs {
        match (table.get(w1), table.get(w2)) {
            (Some(a), Some(b)) => match cosine(a, b) {
                Ok(c) => {
                    gold.push(*score);
                    cos.push(c);
                }
                Err(_) => skipped += 1,
            },
            _ => skipped += 1,
        }
    }
    if gold.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "only {} of {} pairs usable",
            gold.len(),
            pairs.len()
        )));
    }
    Ok(SimilarityEval {
        spearman: spearman(&gold, &cos)?,
        pairs_used: gold.len(),
        pairs_skipped: skipped,
    })
}
