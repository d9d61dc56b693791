//! Protected-label corruption for robustness experiments.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Reassigns floor(fraction·n) uniformly chosen labels (without replacement)
/// to a uniformly random *different* class from the observed label set.
/// Deterministic under `seed`.
pub fn corrupt_labels(labels: &[usize], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!(
            "corruption fraction must be in [0, 1], got {fraction}"
        )));
    }
    let n = labels.len();
    let count = (fraction * n as f64).floor() as usize;
    let mut out = labels.to_vec();
    if count == 0 {
        return Ok(out);
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidInput(
            "cannot corrupt labels drawn from a single class".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    for &i in indices.iter().take(count) {
        // Uniform over the other classes: draw from k-1 slots, skipping the
        // current class by swapping in the last one.
        let current = out[i];
        let pos = classes.iter().position(|&c| c == current).unwrap();
        let r = rng.random_range(0..classes.len() - 1);
        let pick = if r == pos { classes.len() - 1 } else { r };
        out[i] = classes[pick];
    }
    Ok(out)
}
