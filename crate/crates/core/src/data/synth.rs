//! Synthetic benchmark generation: Gaussian mixtures with controllable
//! target/protected alignment, and the proportion-controlled subsampling
//! protocol.

use super::{LabeledDataset, Split};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Parameters of the mixture generator.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    /// Class count per protected attribute (one entry per attribute).
    pub g_classes: Vec<usize>,
    pub y_classes: usize,
    /// Alignment between y and the first protected attribute:
    /// P(y = aligned class | g) interpolates so that 0.5 means independent
    /// (exactly ρ for binary y) and 1.0 means y always equals g's aligned
    /// class.
    pub correlation: f64,
    /// Isotropic noise scale added on top of the class means.
    pub noise: f64,
    pub seed: u64,
    /// Train/dev fractions; the remainder is the test split.
    pub train_fraction: f64,
    pub dev_fraction: f64,
}

impl SynthConfig {
    pub fn new(n: usize, d: usize, g_classes: Vec<usize>, y_classes: usize) -> Self {
        Self {
            n,
            d,
            g_classes,
            y_classes,
            correlation: 0.5,
            noise: 0.5,
            seed: 0,
            train_fraction: 0.7,
            dev_fraction: 0.1,
        }
    }
}

/// Draws a labeled mixture: x = mean_y[y] + Σ_a mean_g[a][g_a] + noise·N(0, I).
/// Protected attributes are uniform and independent of each other; y is tied
/// to the first attribute through `correlation`. Deterministic under seed.
pub fn synth_mixture(cfg: &SynthConfig) -> Result<LabeledDataset> {
    if cfg.n == 0 || cfg.d == 0 {
        return Err(Error::InvalidConfig("n and d must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.correlation) {
        return Err(Error::InvalidConfig(format!(
            "correlation must be in [0, 1], got {}",
            cfg.correlation
        )));
    }
    if cfg.y_classes < 2 || cfg.g_classes.is_empty() || cfg.g_classes.iter().any(|&k| k < 2) {
        return Err(Error::InvalidConfig(
            "need at least two classes per label".into(),
        ));
    }
    if cfg.noise < 0.0 || !cfg.noise.is_finite() {
        return Err(Error::InvalidConfig("noise must be nonnegative".into()));
    }
    if cfg.train_fraction <= 0.0
        || cfg.dev_fraction < 0.0
        || cfg.train_fraction + cfg.dev_fraction >= 1.0
    {
        return Err(Error::InvalidConfig("bad split fractions".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Class means first, so the draw order stays stable if n changes.
    let y_means = class_means(cfg.y_classes, cfg.d, &mut rng);
    let g_means: Vec<Vec<Array1<f64>>> = cfg
        .g_classes
        .iter()
        .map(|&k| class_means(k, cfg.d, &mut rng))
        .collect();

    let mut vectors = Array2::<f64>::zeros((cfg.n, cfg.d));
    let mut y = Vec::with_capacity(cfg.n);
    let mut g: Vec<Vec<usize>> = vec![Vec::with_capacity(cfg.n); cfg.g_classes.len()];
    for i in 0..cfg.n {
        let mut g_here = Vec::with_capacity(cfg.g_classes.len());
        for (a, &k) in cfg.g_classes.iter().enumerate() {
            let cls = rng.random_range(0..k);
            g[a].push(cls);
            g_here.push(cls);
        }
        let yi = draw_target(g_here[0], cfg.y_classes, cfg.correlation, &mut rng);
        y.push(yi);
        for j in 0..cfg.d {
            let mut v = y_means[yi][j];
            for (a, means) in g_means.iter().enumerate() {
                v += means[g_here[a]][j];
            }
            if cfg.noise > 0.0 {
                let e: f64 = rng.sample(StandardNormal);
                v += cfg.noise * e;
            }
            vectors[(i, j)] = v;
        }
    }

    let splits = assign_splits(cfg.n, cfg.train_fraction, cfg.dev_fraction, &mut rng);
    let y_vocab: Vec<String> = (0..cfg.y_classes).map(|c| format!("y{c}")).collect();
    let g_vocabs: Vec<Vec<String>> = cfg
        .g_classes
        .iter()
        .enumerate()
        .map(|(a, &k)| (0..k).map(|c| format!("g{a}_{c}")).collect())
        .collect();
    let g_names: Vec<String> = (0..cfg.g_classes.len()).map(|a| format!("g{a}")).collect();
    LabeledDataset::new(vectors, Some(y), g, splits, Some(y_vocab), g_vocabs, g_names)
}

fn class_means<R: Rng>(classes: usize, d: usize, rng: &mut R) -> Vec<Array1<f64>> {
    (0..classes)
        .map(|_| Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// With probability |2ρ−1| the target is forced to the (anti-)aligned class,
/// otherwise it is uniform. For binary targets this gives
/// P(y = aligned | g) = ρ exactly; ρ = 0.5 is uniform for any class count.
fn draw_target<R: Rng>(g_first: usize, y_classes: usize, rho: f64, rng: &mut R) -> usize {
    let strength = (2.0 * rho - 1.0).abs();
    if rng.random_range(0.0..1.0) < strength {
        let aligned = g_first % y_classes;
        if rho >= 0.5 {
            aligned
        } else {
            // Anti-aligned: uniform over the other classes.
            let r = rng.random_range(0..y_classes - 1);
            if r >= aligned {
                r + 1
            } else {
                r
            }
        }
    } else {
        rng.random_range(0..y_classes)
    }
}

fn assign_splits<R: Rng>(n: usize, train: f64, dev: f64, rng: &mut R) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let n_train = ((n as f64) * train).floor() as usize;
    let n_dev = ((n as f64) * dev).floor() as usize;
    let mut splits = vec![Split::Test; n];
    for (pos, &i) in order.iter().enumerate() {
        splits[i] = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_dev {
            Split::Dev
        } else {
            Split::Test
        };
    }
    splits
}

/// Subsamples a binary-y/binary-g dataset so class y=1 holds `ratio` of g=1
/// and (1−ratio) of g=0 samples, with the mirror image in y=0. Proportions
/// are hit exactly: the largest per-class size whose ratio·size is integral
/// is used, and leftover samples are dropped.
pub fn controlled_split(ds: &LabeledDataset, ratio: f64, seed: u64) -> Result<LabeledDataset> {
    if !(0.5..1.0).contains(&ratio) {
        return Err(Error::InvalidInput(format!(
            "ratio must be in [0.5, 1), got {ratio}"
        )));
    }
    let y = ds
        .y()
        .ok_or_else(|| Error::InvalidInput("controlled split needs target labels".into()))?;
    if ds.y_vocab().map(|v| v.len()) != Some(2) || ds.g_vocab(0).len() != 2 {
        return Err(Error::InvalidInput(
            "controlled split is defined for binary target and binary protected labels".into(),
        ));
    }
    let g = ds.g(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = Vec::new();
    for split in [Split::Train, Split::Dev, Split::Test] {
        let rows = ds.indices_of(split);
        if rows.is_empty() {
            continue;
        }
        // Cells within this split: (y, g) → row indices.
        let mut cells: [[Vec<usize>; 2]; 2] = Default::default();
        for &r in &rows {
            cells[y[r]][g[r]].push(r);
        }
        // y=1 draws `ratio` from g=1; y=0 mirrors with `ratio` from g=0.
        let take1 = plan_class(cells[1][1].len(), cells[1][0].len(), ratio).ok_or_else(|| {
            Error::Infeasible(format!(
                "cannot realize ratio {ratio} in class y=1: {} g=1 / {} g=0 rows available",
                cells[1][1].len(),
                cells[1][0].len()
            ))
        })?;
        let take0 = plan_class(cells[0][0].len(), cells[0][1].len(), ratio).ok_or_else(|| {
            Error::Infeasible(format!(
                "cannot realize ratio {ratio} in class y=0: {} g=0 / {} g=1 rows available",
                cells[0][0].len(),
                cells[0][1].len()
            ))
        })?;
        for (cell, count) in [
            (&cells[1][1], take1.0),
            (&cells[1][0], take1.1),
            (&cells[0][0], take0.0),
            (&cells[0][1], take0.1),
        ] {
            let mut pool = cell.clone();
            pool.shuffle(&mut rng);
            keep.extend(pool.into_iter().take(count));
        }
    }
    keep.sort_unstable();
    ds.subset(&keep)
}

/// Largest (majority, minority) cell take with majority/(majority+minority)
/// = ratio exactly (to 1e-9) under availability; None if even the smallest
/// positive class size is infeasible.
fn plan_class(major_avail: usize, minor_avail: usize, ratio: f64) -> Option<(usize, usize)> {
    let max_total = ((major_avail as f64) / ratio)
        .floor()
        .min(((minor_avail as f64) / (1.0 - ratio)).floor()) as usize;
    for total in (1..=max_total).rev() {
        let major = ratio * total as f64;
        let rounded = major.round();
        if (major - rounded).abs() < 1e-9 {
            let major = rounded as usize;
            let minor = total - major;
            if major <= major_avail && minor <= minor_avail {
                return Some((major, minor));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_dataset() {
        let cfg = SynthConfig::new(64, 5, vec![2], 2);
        let a = synth_mixture(&cfg).unwrap();
        let b = synth_mixture(&cfg).unwrap();
        assert_eq!(a.vectors(), b.vectors());
        assert_eq!(a.y().unwrap(), b.y().unwrap());
        assert_eq!(a.g(0), b.g(0));
    }

    #[test]
    fn zero_noise_gives_finitely_many_points() {
        let mut cfg = SynthConfig::new(200, 3, vec![2], 2);
        cfg.noise = 0.0;
        let ds = synth_mixture(&cfg).unwrap();
        let mut distinct: Vec<Vec<u64>> = Vec::new();
        for row in ds.vectors().rows() {
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            if !distinct.contains(&key) {
                distinct.push(key);
            }
        }
        assert!(distinct.len() <= 4); // |g| · |y|
    }

    #[test]
    fn invalid_correlation_is_a_config_error() {
        let mut cfg = SynthConfig::new(10, 2, vec![2], 2);
        cfg.correlation = 1.2;
        assert!(matches!(
            synth_mixture(&cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn controlled_split_even_ratio_balances_groups() {
        let mut cfg = SynthConfig::new(400, 3, vec![2], 2);
        cfg.seed = 5;
        let ds = synth_mixture(&cfg).unwrap();
        let out = controlled_split(&ds, 0.5, 1).unwrap();
        let y = out.y().unwrap();
        let g = out.g(0);
        for target in [0usize, 1] {
            let idx: Vec<usize> = (0..out.len()).filter(|&i| y[i] == target).collect();
            let g1 = idx.iter().filter(|&&i| g[i] == 1).count();
            assert_eq!(2 * g1, idx.len());
        }
    }

    #[test]
    fn controlled_split_exact_skew() {
        let mut cfg = SynthConfig::new(2000, 3, vec![2], 2);
        cfg.seed = 6;
        let ds = synth_mixture(&cfg).unwrap();
        let out = controlled_split(&ds, 0.8, 2).unwrap();
        let y = out.y().unwrap();
        let g = out.g(0);
        let idx1: Vec<usize> = (0..out.len()).filter(|&i| y[i] == 1).collect();
        let g1 = idx1.iter().filter(|&&i| g[i] == 1).count() as f64;
        assert!((g1 / idx1.len() as f64 - 0.8).abs() < 1e-9);
        let idx0: Vec<usize> = (0..out.len()).filter(|&i| y[i] == 0).collect();
        let g0 = idx0.iter().filter(|&&i| g[i] == 0).count() as f64;
        assert!((g0 / idx0.len() as f64 - 0.8).abs() < 1e-9);
    }

    #[test]
    fn controlled_split_infeasible_on_tiny_data() {
        let mut cfg = SynthConfig::new(40, 2, vec![2], 2);
        cfg.seed = 7;
        let ds = synth_mixture(&cfg).unwrap();
        assert!(matches!(
            controlled_split(&ds, 0.99, 0),
            Err(Error::Infeasible(_))
        ));
    }
}
