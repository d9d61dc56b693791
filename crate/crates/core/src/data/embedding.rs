//! Word-embedding table I/O (whitespace text format) and the
//! projection-based biased/neutral token split.

use super::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::linalg;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// token → d-vector map with a fixed dimension and unique tokens.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Array2<f64>,
}

impl EmbeddingTable {
    pub fn new(tokens: Vec<String>, vectors: Array2<f64>) -> Result<Self> {
        if tokens.len() != vectors.nrows() {
            return Err(Error::InvalidInput("token/vector count mismatch".into()));
        }
        if tokens.is_empty() || vectors.ncols() == 0 {
            return Err(Error::Format("empty embedding table".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self {
            tokens,
            index,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn get(&self, token: &str) -> Option<ndarray::ArrayView1<'_, f64>> {
        self.index.get(token).map(|&i| self.vectors.row(i))
    }
}

/// Reads the de-facto text format: one `token v1 v2 … vd` line per entry,
/// whitespace separated. The dimension is fixed by the first well-formed
/// line; malformed lines (wrong arity or unparseable numbers) are skipped
/// and counted, but more than 0.1% of them fails the load.
pub fn read_embedding_text(path: &Path) -> Result<EmbeddingTable> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut tokens = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut malformed = 0usize;
    let mut total = 0usize;
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        let mut parts = line.split_whitespace();
        let token = match parts.next() {
            Some(t) => t,
            None => {
                malformed += 1;
                continue;
            }
        };
        let parsed: std::result::Result<Vec<f64>, _> = parts.map(str::parse).collect();
        match parsed {
            Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => {
                match dim {
                    None => dim = Some(v.len()),
                    Some(d) if d != v.len() => {
                        malformed += 1;
                        continue;
                    }
                    _ => {}
                }
                tokens.push(token.to_string());
                values.extend_from_slice(&v);
            }
            _ => malformed += 1,
        }
    }
    if tokens.is_empty() {
        return Err(Error::Format(format!(
            "no valid embedding lines in {}",
            path.display()
        )));
    }
    if malformed * 1000 > total {
        return Err(Error::Format(format!(
            "{malformed} of {total} lines malformed (cap is 0.1%)"
        )));
    }
    let d = dim.unwrap();
    let vectors = Array2::from_shape_vec((tokens.len(), d), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    EmbeddingTable::new(tokens, vectors)
}

/// Writes the same text format with full-precision floats (exact reload).
pub fn write_embedding_text(path: &Path, table: &EmbeddingTable) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (i, token) in table.tokens.iter().enumerate() {
        write!(file, "{token}")?;
        for v in table.vectors.row(i) {
            write!(file, " {v}")?;
        }
        writeln!(file)?;
    }
    Ok(())
}

/// Result of ranking tokens along the attribute direction.
#[derive(Debug, Clone)]
pub struct DirectionSplit {
    pub direction: Array1<f64>,
    /// Most positive projections (direction oriented toward the second
    /// element of each pair).
    pub positive: Vec<String>,
    /// Most negative projections.
    pub negative: Vec<String>,
    /// Smallest-magnitude projections.
    pub neutral: Vec<String>,
}

/// Finds the attribute direction as the top principal component of the
/// pairwise difference vectors (second minus first per pair, no centering),
/// orients it so the second pair elements project positively, and returns
/// the `top_n` most positive / most negative / most neutral tokens.
pub fn gender_direction_split(
    table: &EmbeddingTable,
    pairs: &[(String, String)],
    top_n: usize,
) -> Result<DirectionSplit> {
    let mut diffs: Vec<Array1<f64>> = Vec::new();
    let mut seconds: Vec<Array1<f64>> = Vec::new();
    for (first, second) in pairs {
        match (table.get(first), table.get(second)) {
            (Some(a), Some(b)) => {
                diffs.push(&b.to_owned() - &a.to_owned());
                seconds.push(b.to_owned());
            }
            _ => continue,
        }
    }
    if diffs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least two pairs present in the table, found {}",
            diffs.len()
        )));
    }
    if top_n == 0 || 3 * top_n > table.len() {
        return Err(Error::InvalidInput(format!(
            "top_n {top_n} incompatible with vocabulary of {}",
            table.len()
        )));
    }
    let d = table.dim();
    let mut diff_matrix = Array2::<f64>::zeros((diffs.len(), d));
    for (i, v) in diffs.iter().enumerate() {
        diff_matrix.row_mut(i).assign(v);
    }
    let mut direction = top_right_singular_vector(&diff_matrix)?;
    // Orient toward the second pair elements.
    let mean_proj: f64 = seconds.iter().map(|v| v.dot(&direction)).sum::<f64>() / seconds.len() as f64;
    if mean_proj < 0.0 {
        direction.mapv_inplace(|v| -v);
    }

    let mut projections: Vec<(usize, f64)> = (0..table.len())
        .map(|i| (i, table.vectors.row(i).dot(&direction)))
        .collect();
    projections.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let positive: Vec<String> = projections[..top_n]
        .iter()
        .map(|&(i, _)| table.tokens[i].clone())
        .collect();
    let negative: Vec<String> = projections[projections.len() - top_n..]
        .iter()
        .rev()
        .map(|&(i, _)| table.tokens[i].clone())
        .collect();
    let mut by_magnitude = projections;
    by_magnitude.sort_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap());
    let neutral: Vec<String> = by_magnitude[..top_n]
        .iter()
        .map(|&(i, _)| table.tokens[i].clone())
        .collect();
    Ok(DirectionSplit {
        direction,
        positive,
        negative,
        neutral,
    })
}

/// Top right singular vector of a (small) matrix via the Gram eigen problem,
/// refined by a few power iterations for a clean direction.
fn top_right_singular_vector(m: &Array2<f64>) -> Result<Array1<f64>> {
    let gram = m.t().dot(m);
    let d = gram.nrows();
    // Power iteration with a deterministic start; the Jacobi eigenvalues are
    // only used to confirm the matrix is nonzero.
    let eig = linalg::symmetric_eigenvalues(&gram);
    if eig.first().copied().unwrap_or(0.0) <= 1e-300 {
        return Err(Error::DegenerateInput(
            "difference vectors are all zero".into(),
        ));
    }
    let mut v = Array1::<f64>::from_elem(d, 1.0 / (d as f64).sqrt());
    for _ in 0..200 {
        let mut next = gram.dot(&v);
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-300 {
            // Start vector orthogonal to the top eigenspace; nudge it.
            next = Array1::from_shape_fn(d, |i| 1.0 / (i as f64 + 2.0));
        } else {
            next.mapv_inplace(|x| x / norm);
        }
        let delta: f64 = next
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta < 1e-14 {
            break;
        }
    }
    Ok(v)
}

/// Builds a probe-ready dataset from a direction split: vectors of the
/// positive/negative (optionally neutral) tokens with the bias side as the
/// protected label, split into train/dev/test by seeded shuffle.
pub fn direction_split_dataset(
    table: &EmbeddingTable,
    split: &DirectionSplit,
    include_neutral: bool,
    seed: u64,
) -> Result<LabeledDataset> {
    let mut rows: Vec<(&str, usize)> = Vec::new();
    for t in &split.positive {
        rows.push((t, 0));
    }
    for t in &split.negative {
        rows.push((t, 1));
    }
    if include_neutral {
        for t in &split.neutral {
            rows.push((t, 2));
        }
    }
    let mut vectors = Array2::<f64>::zeros((rows.len(), table.dim()));
    let mut labels = Vec::with_capacity(rows.len());
    for (i, (token, label)) in rows.iter().enumerate() {
        let v = table
            .get(token)
            .ok_or_else(|| Error::InvalidInput(format!("token {token:?} missing")))?;
        vectors.row_mut(i).assign(&v);
        labels.push(*label);
    }
    let n = rows.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = (n as f64 * 0.7).floor() as usize;
    let n_dev = (n as f64 * 0.1).floor() as usize;
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
    let mut vocab = vec!["positive-bias".to_string(), "negative-bias".to_string()];
    if include_neutral {
        vocab.push("neutral".to_string());
    }
    LabeledDataset::new(
        vectors,
        None,
        vec![labels],
        splits,
        None,
        vec![vocab],
        vec!["bias-direction".to_string()],
    )
}

/// A small default list of gendered (female, male) pairs for tests and the
/// bundled pipeline; callers working with real embeddings should supply
/// their own list.
pub fn default_gender_pairs() -> Vec<(String, String)> {
    [
        ("she", "he"),
        ("her", "his"),
        ("woman", "man"),
        ("women", "men"),
        ("girl", "boy"),
        ("mother", "father"),
        ("daughter", "son"),
        ("sister", "brother"),
        ("queen", "king"),
        ("female", "male"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}
