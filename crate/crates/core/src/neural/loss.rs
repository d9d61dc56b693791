//! Cross-entropy over class logits, in natural-log units, with its gradient.

use crate::error::{Error, Result};
use ndarray::Array2;

/// Loss value plus d(loss)/d(logits).
#[derive(Debug, Clone)]
pub struct CrossEntropy {
    pub loss: f64,
    pub grad: Array2<f64>,
}

/// Mean negative log softmax probability of the true class. The gradient is
/// (softmax − onehot)/batch.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> Result<CrossEntropy> {
    let (n, k) = (logits.nrows(), logits.ncols());
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} logit rows but {} labels",
            labels.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let mut grad = Array2::<f64>::zeros((n, k));
    let mut loss = 0.0;
    for i in 0..n {
        let label = labels[i];
        if label >= k {
            return Err(Error::InvalidInput(format!(
                "label {label} out of range for {k} classes"
            )));
        }
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for j in 0..k {
            denom += (row[j] - max).exp();
        }
        let log_denom = denom.ln();
        loss += log_denom - (row[label] - max);
        for j in 0..k {
            let p = (row[j] - max).exp() / denom;
            grad[(i, j)] = (p - if j == label { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    Ok(CrossEntropy {
        loss: loss / n as f64,
        grad,
    })
}

/// Row-wise softmax probabilities.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let (n, k) = (logits.nrows(), logits.ncols());
    let mut out = Array2::<f64>::zeros((n, k));
    for i in 0..n {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for j in 0..k {
            let e = (row[j] - max).exp();
            out[(i, j)] = e;
            denom += e;
        }
        for j in 0..k {
            out[(i, j)] /= denom;
        }
    }
    out
}
