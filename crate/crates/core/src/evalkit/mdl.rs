//! Online (prequential) coding description length of labels given
//! representations. The data is consumed block by block along a fraction
//! schedule: the first block is coded uniformly, every later block is coded
//! with a probe trained on everything before it. Hard-to-extract attributes
//! cost close to the uniform n·log2 K bits; easy ones compress well.

use super::probe::{train_probe, ProbeConfig};
use crate::error::{Error, Result};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The cited method's standard fraction schedule.
pub fn default_fractions() -> Vec<f64> {
    vec![
        0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.0625, 0.125, 0.25, 0.5, 1.0,
    ]
}

/// Online codelength report, in bits.
#[derive(Debug, Clone)]
pub struct MdlReport {
    pub bits: f64,
    /// n·log2 K: the cost of coding every label uniformly.
    pub uniform_bits: f64,
    /// bits / uniform_bits.
    pub compression_ratio: f64,
    pub block_sizes: Vec<usize>,
    pub n: usize,
    pub class_count: usize,
}

/// Computes the online codelength over (z, labels). The sample order is
/// shuffled once under `cfg.seed`; block boundaries are floor(fraction·n)
/// cumulative counts and every block must be nonempty.
pub fn mdl_online(
    z: &Array2<f64>,
    labels: &[usize],
    fractions: &[f64],
    cfg: &ProbeConfig,
) -> Result<MdlReport> {
    let n = z.nrows();
    if labels.len() != n || n == 0 {
        return Err(Error::InvalidInput("mdl input size mismatch".into()));
    }
    if fractions.is_empty() {
        return Err(Error::InvalidConfig("empty fraction schedule".into()));
    }
    for pair in fractions.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::InvalidConfig(
                "fractions must be strictly increasing".into(),
            ));
        }
    }
    if fractions[0] <= 0.0 || (fractions[fractions.len() - 1] - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidConfig(
            "fractions must start above 0 and end at 1.0".into(),
        ));
    }
    let class_count = labels.iter().max().map(|&m| m + 1).unwrap_or(0);
    if class_count < 2 {
        return Err(Error::DegeneratePartition(
            "labels cover fewer than two classes".into(),
        ));
    }

    // Block boundaries.
    let mut boundaries: Vec<usize> = fractions
        .iter()
        .map(|f| ((f * n as f64).floor() as usize).min(n))
        .collect();
    *boundaries.last_mut().unwrap() = n;
    let mut block_sizes = Vec::with_capacity(boundaries.len());
    let mut prev = 0usize;
    for &b in &boundaries {
        if b <= prev {
            return Err(Error::InvalidConfig(format!(
                "fraction schedule produces an empty block at boundary {b}"
            )));
        }
        block_sizes.push(b - prev);
        prev = b;
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order.shuffle(&mut rng);

    let log2k = (class_count as f64).log2();
    let mut bits = block_sizes[0] as f64 * log2k;
    for (bi, &boundary) in boundaries.iter().enumerate().skip(1) {
        let train_rows = &order[..boundaries[bi - 1]];
        let block_rows = &order[boundaries[bi - 1]..boundary];
        let z_train = z.select(Axis(0), train_rows);
        let y_train: Vec<usize> = train_rows.iter().map(|&i| labels[i]).collect();
        let distinct = y_train.iter().collect::<std::collections::BTreeSet<_>>().len();
        if distinct < 2 {
            // Degenerate prefix: fall back to the uniform code for this block.
            bits += block_rows.len() as f64 * log2k;
            continue;
        }
        let probe_cfg = ProbeConfig {
            seed: cfg.seed.wrapping_add(bi as u64),
            ..cfg.clone()
        };
        let model = train_probe(&z_train, &y_train, class_count, &probe_cfg)?;
        let z_block = z.select(Axis(0), block_rows);
        let proba = model.predict_proba(&z_block)?;
        for (row, &i) in block_rows.iter().enumerate() {
            let p = proba[(row, labels[i])].max(1e-12);
            bits -= p.log2();
        }
    }

    let uniform_bits = n as f64 * log2k;
    Ok(MdlReport {
        bits,
        uniform_bits,
        compression_ratio: bits / uniform_bits,
        block_sizes,
        n,
        class_count,
    })
}
