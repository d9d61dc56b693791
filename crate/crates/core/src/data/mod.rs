//! Dataset ingestion, persistence, and synthetic benchmark generation.

mod container;
mod embedding;
mod synth;

pub use container::{load_dataset, save_dataset};
pub use embedding::{
    default_gender_pairs, direction_split_dataset, gender_direction_split, read_embedding_text,
    write_embedding_text, DirectionSplit, EmbeddingTable,
};
pub use synth::{controlled_split, synth_mixture, SynthConfig};

use crate::error::{Error, Result};
use ndarray::{Array2, Axis};

/// Train/dev/test tag carried by every sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Dev => 1,
            Split::Test => 2,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Split::Train),
            1 => Ok(Split::Dev),
            2 => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split tag {other}"))),
        }
    }
}

/// Vectors plus an optional target label and one or more protected labels,
/// with per-sample split tags and label vocabularies. Immutable after
/// construction.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    vectors: Array2<f64>,
    y: Option<Vec<usize>>,
    g: Vec<Vec<usize>>,
    splits: Vec<Split>,
    y_vocab: Option<Vec<String>>,
    g_vocabs: Vec<Vec<String>>,
    g_names: Vec<String>,
}

impl LabeledDataset {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        vectors: Array2<f64>,
        y: Option<Vec<usize>>,
        g: Vec<Vec<usize>>,
        splits: Vec<Split>,
        y_vocab: Option<Vec<String>>,
        g_vocabs: Vec<Vec<String>>,
        g_names: Vec<String>,
    ) -> Result<Self> {
        let n = vectors.nrows();
        if n == 0 || vectors.ncols() == 0 {
            return Err(Error::InvalidInput("empty dataset".into()));
        }
        if !vectors.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite vector entries".into()));
        }
        if g.is_empty() {
            return Err(Error::InvalidInput(
                "dataset needs at least one protected attribute".into(),
            ));
        }
        if splits.len() != n {
            return Err(Error::InvalidInput("split tags length mismatch".into()));
        }
        match (&y, &y_vocab) {
            (Some(y), Some(vocab)) => {
                if y.len() != n {
                    return Err(Error::InvalidInput("target label length mismatch".into()));
                }
                if let Some(&bad) = y.iter().find(|&&l| l >= vocab.len()) {
                    return Err(Error::InvalidInput(format!(
                        "target label {bad} outside vocabulary of {}",
                        vocab.len()
                    )));
                }
            }
            (None, None) => {}
            _ => {
                return Err(Error::InvalidInput(
                    "target labels and vocabulary must be both present or both absent".into(),
                ))
            }
        }
        if g.len() != g_vocabs.len() || g.len() != g_names.len() {
            return Err(Error::InvalidInput(
                "protected attribute metadata length mismatch".into(),
            ));
        }
        for (labels, vocab) in g.iter().zip(&g_vocabs) {
            if labels.len() != n {
                return Err(Error::InvalidInput(
                    "protected label length mismatch".into(),
                ));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= vocab.len()) {
                return Err(Error::InvalidInput(format!(
                    "protected label {bad} outside vocabulary of {}",
                    vocab.len()
                )));
            }
        }
        Ok(Self {
            vectors,
            y,
            g,
            splits,
            y_vocab,
            g_vocabs,
            g_names,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn y(&self) -> Option<&[usize]> {
        self.y.as_deref()
    }

    pub fn y_vocab(&self) -> Option<&[String]> {
        self.y_vocab.as_deref()
    }

    pub fn attribute_count(&self) -> usize {
        self.g.len()
    }

    pub fn g(&self, attr: usize) -> &[usize] {
        &self.g[attr]
    }

    pub fn g_all(&self) -> &[Vec<usize>] {
        &self.g
    }

    pub fn g_vocab(&self, attr: usize) -> &[String] {
        &self.g_vocabs[attr]
    }

    pub fn g_name(&self, attr: usize) -> &str {
        &self.g_names[attr]
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Same labels and tags, new vectors (e.g. after passing X through a
    /// trained feature map).
    pub fn with_vectors(&self, vectors: Array2<f64>) -> Result<Self> {
        if vectors.nrows() != self.len() {
            return Err(Error::InvalidInput(
                "replacement vectors have a different row count".into(),
            ));
        }
        Self::new(
            vectors,
            self.y.clone(),
            self.g.clone(),
            self.splits.clone(),
            self.y_vocab.clone(),
            self.g_vocabs.clone(),
            self.g_names.clone(),
        )
    }

    /// Row subset preserving order, labels, and split tags.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("empty subset".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.len()) {
            return Err(Error::InvalidInput(format!("row {bad} out of range")));
        }
        Self::new(
            self.vectors.select(Axis(0), rows),
            self.y
                .as_ref()
                .map(|y| rows.iter().map(|&r| y[r]).collect()),
            self.g
                .iter()
                .map(|attr| rows.iter().map(|&r| attr[r]).collect())
                .collect(),
            rows.iter().map(|&r| self.splits[r]).collect(),
            self.y_vocab.clone(),
            self.g_vocabs.clone(),
            self.g_names.clone(),
        )
    }

    /// Replace one attribute's labels (used by corruption sweeps).
    pub fn with_g(&self, attr: usize, labels: Vec<usize>) -> Result<Self> {
        if attr >= self.g.len() {
            return Err(Error::InvalidInput(format!("no attribute {attr}")));
        }
        if labels.len() != self.len() {
            return Err(Error::InvalidInput("label length mismatch".into()));
        }
        let mut g = self.g.clone();
        g[attr] = labels;
        Self::new(
            self.vectors.clone(),
            self.y.clone(),
            g,
            self.splits.clone(),
            self.y_vocab.clone(),
            self.g_vocabs.clone(),
            self.g_names.clone(),
        )
    }
}
