//! The audit suite: probing attacks, online-coding description length,
//! group-fairness metrics, clustering overlap, and numerical rank, bundled
//! into a single report per dataset.

pub mod cluster;
pub mod fairness;
pub mod mdl;
pub mod probe;
pub mod rank;
pub mod similarity;

pub use cluster::{homogeneity_completeness_v, kmeans, kmeans_vmeasure};
pub use fairness::{demographic_parity, tpr_gap, TprGapReport};
pub use mdl::{default_fractions, mdl_online, MdlReport};
pub use probe::{macro_f1, majority_class, probe, train_probe, ProbeConfig, ProbeReport};
pub use rank::{numerical_rank, numerical_rank_with_tol};
pub use similarity::{cosine, pair_similarity_eval, spearman, SimilarityEval};

use crate::data::{LabeledDataset, Split};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Knobs for a full audit run.
#[derive(Debug, Clone)]
pub struct AuditOptions {
    pub probe: ProbeConfig,
    pub mdl_fractions: Vec<f64>,
    /// Online coding is by far the most expensive part of an audit; sweeps
    /// that do not need it can switch it off.
    pub run_mdl: bool,
    /// Override for the rank tolerance factor (default max(n, d)).
    pub rank_tol_factor: Option<f64>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            probe: ProbeConfig::default(),
            mdl_fractions: default_fractions(),
            run_mdl: true,
            rank_tol_factor: None,
        }
    }
}

/// Probe-derived numbers for the target attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetAudit {
    pub name: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub delta_f1: f64,
    pub majority_accuracy: f64,
    pub mdl_bits: Option<f64>,
    pub mdl_compression: Option<f64>,
}

/// Probe, description-length, clustering, and fairness numbers for one
/// protected attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeAudit {
    pub name: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub delta_f1: f64,
    pub majority_accuracy: f64,
    pub mdl_bits: Option<f64>,
    pub mdl_compression: Option<f64>,
    /// V-measure of k-means (k = class count) against this attribute.
    pub v_measure: f64,
    /// Demographic parity of the target classifier (binary attributes with a
    /// target only).
    pub dp: Option<f64>,
    /// RMS of the per-target-class TPR gaps (same requirements as `dp`).
    pub gap_rms: Option<f64>,
    pub gaps: Option<Vec<f64>>,
    /// Per-class flags: true when one group had no true samples of a class.
    pub gap_undefined: Option<Vec<bool>>,
}

/// Full audit of one dataset. Serializes to a stable flat JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    pub numerical_rank: usize,
    pub target: Option<TargetAudit>,
    pub attributes: Vec<AttributeAudit>,
    /// Joint product-class audit when two or more protected attributes are
    /// present (probe and MDL only).
    pub intersectional: Option<TargetAudit>,
}

impl AuditReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    /// Aligned plain-text rendering of the same numbers.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let mut row = |k: &str, v: String| {
            out.push_str(&format!("{k:<38} {v}\n"));
        };
        row("samples (train/test)", format!("{}/{}", self.n_train, self.n_test));
        row("dimension", self.dim.to_string());
        row("numerical rank", self.numerical_rank.to_string());
        if let Some(t) = &self.target {
            row(&format!("[{}] probe accuracy", t.name), fmt(t.accuracy));
            row(&format!("[{}] probe macro-F1", t.name), fmt(t.macro_f1));
            row(&format!("[{}] delta-F1", t.name), fmt(t.delta_f1));
            row(
                &format!("[{}] majority accuracy", t.name),
                fmt(t.majority_accuracy),
            );
            if let Some(bits) = t.mdl_bits {
                row(&format!("[{}] MDL (bits)", t.name), fmt(bits));
            }
        }
        for a in &self.attributes {
            row(&format!("[{}] probe accuracy", a.name), fmt(a.accuracy));
            row(&format!("[{}] probe macro-F1", a.name), fmt(a.macro_f1));
            row(&format!("[{}] delta-F1", a.name), fmt(a.delta_f1));
            row(
                &format!("[{}] majority accuracy", a.name),
                fmt(a.majority_accuracy),
            );
            if let Some(bits) = a.mdl_bits {
                row(&format!("[{}] MDL (bits)", a.name), fmt(bits));
            }
            row(&format!("[{}] v-measure", a.name), fmt(a.v_measure));
            if let Some(dp) = a.dp {
                row(&format!("[{}] demographic parity", a.name), fmt(dp));
            }
            if let Some(g) = a.gap_rms {
                row(&format!("[{}] TPR gap RMS", a.name), fmt(g));
            }
        }
        if let Some(t) = &self.intersectional {
            row(&format!("[{}] probe accuracy", t.name), fmt(t.accuracy));
            row(&format!("[{}] delta-F1", t.name), fmt(t.delta_f1));
            if let Some(bits) = t.mdl_bits {
                row(&format!("[{}] MDL (bits)", t.name), fmt(bits));
            }
        }
        out
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

/// Runs the full audit: a probe per attribute (and the target when present),
/// online-coding MDL over the train split, fairness metrics of the target
/// probe's predictions, per-attribute clustering V-measure over all rows,
/// and the numerical rank of the whole matrix.
pub fn run_audit(ds: &LabeledDataset, opts: &AuditOptions) -> Result<AuditReport> {
    let train_idx = ds.indices_of(Split::Train);
    let test_idx = ds.indices_of(Split::Test);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::InvalidInput(
            "audit needs nonempty train and test splits".into(),
        ));
    }
    let z_train = ds.vectors().select(ndarray::Axis(0), &train_idx);
    let z_test = ds.vectors().select(ndarray::Axis(0), &test_idx);

    let rank = match opts.rank_tol_factor {
        Some(t) => numerical_rank_with_tol(ds.vectors(), t)?,
        None => numerical_rank(ds.vectors())?,
    };

    // Target probe (needed for the fairness metrics too).
    let mut target = None;
    let mut y_predictions: Option<Vec<usize>> = None;
    if let Some(y) = ds.y() {
        let y_train: Vec<usize> = train_idx.iter().map(|&i| y[i]).collect();
        let y_test: Vec<usize> = test_idx.iter().map(|&i| y[i]).collect();
        let cfg = opts.probe.clone().with_seed(opts.probe.seed.wrapping_add(1));
        let report = probe(&z_train, &y_train, &z_test, &y_test, &cfg)?;
        let (mdl_bits, mdl_compression) = if opts.run_mdl {
            let m = mdl_online(&z_train, &y_train, &opts.mdl_fractions, &cfg)?;
            (Some(m.bits), Some(m.compression_ratio))
        } else {
            (None, None)
        };
        y_predictions = Some(report.predictions.clone());
        target = Some(TargetAudit {
            name: "target".to_string(),
            accuracy: report.accuracy,
            macro_f1: report.macro_f1,
            delta_f1: report.delta_f1,
            majority_accuracy: report.majority_accuracy,
            mdl_bits,
            mdl_compression,
        });
    }

    let mut attributes = Vec::with_capacity(ds.attribute_count());
    for a in 0..ds.attribute_count() {
        let labels = ds.g(a);
        let g_train: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let g_test: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
        let cfg = opts
            .probe
            .clone()
            .with_seed(opts.probe.seed.wrapping_add(100 * (a as u64 + 1)));
        let report = probe(&z_train, &g_train, &z_test, &g_test, &cfg)?;
        let (mdl_bits, mdl_compression) = if opts.run_mdl {
            let m = mdl_online(&z_train, &g_train, &opts.mdl_fractions, &cfg)?;
            (Some(m.bits), Some(m.compression_ratio))
        } else {
            (None, None)
        };
        let classes = ds.g_vocab(a).len();
        let v_measure = kmeans_vmeasure(
            ds.vectors(),
            labels,
            classes.max(2),
            opts.probe.seed.wrapping_add(7000 + a as u64),
        )?;
        let binary = classes == 2 && g_test.contains(&0) && g_test.contains(&1);
        let (dp, gap_rms, gaps, gap_undefined) = match (&y_predictions, binary) {
            (Some(preds), true) => {
                let y = ds.y().unwrap();
                let y_test: Vec<usize> = test_idx.iter().map(|&i| y[i]).collect();
                let gap = tpr_gap(&y_test, preds, &g_test)?;
                let dp = demographic_parity(preds, &g_test)?;
                (
                    Some(dp),
                    Some(gap.gap_rms),
                    Some(gap.gaps),
                    Some(gap.undefined_cells),
                )
            }
            _ => (None, None, None, None),
        };
        attributes.push(AttributeAudit {
            name: ds.g_name(a).to_string(),
            accuracy: report.accuracy,
            macro_f1: report.macro_f1,
            delta_f1: report.delta_f1,
            majority_accuracy: report.majority_accuracy,
            mdl_bits,
            mdl_compression,
            v_measure,
            dp,
            gap_rms,
            gaps,
            gap_undefined,
        });
    }

    // Intersectional product classes over all protected attributes.
    let intersectional = if ds.attribute_count() >= 2 {
        let mut strides = Vec::with_capacity(ds.attribute_count());
        let mut stride = 1usize;
        for a in 0..ds.attribute_count() {
            strides.push(stride);
            stride *= ds.g_vocab(a).len();
        }
        let combined: Vec<usize> = (0..ds.len())
            .map(|i| {
                (0..ds.attribute_count())
                    .map(|a| ds.g(a)[i] * strides[a])
                    .sum()
            })
            .collect();
        let c_train: Vec<usize> = train_idx.iter().map(|&i| combined[i]).collect();
        let c_test: Vec<usize> = test_idx.iter().map(|&i| combined[i]).collect();
        let cfg = opts.probe.clone().with_seed(opts.probe.seed.wrapping_add(9000));
        let report = probe(&z_train, &c_train, &z_test, &c_test, &cfg)?;
        let (mdl_bits, mdl_compression) = if opts.run_mdl {
            let m = mdl_online(&z_train, &c_train, &opts.mdl_fractions, &cfg)?;
            (Some(m.bits), Some(m.compression_ratio))
        } else {
            (None, None)
        };
        Some(TargetAudit {
            name: "intersectional".to_string(),
            accuracy: report.accuracy,
            macro_f1: report.macro_f1,
            delta_f1: report.delta_f1,
            majority_accuracy: report.majority_accuracy,
            mdl_bits,
            mdl_compression,
        })
    } else {
        None
    };

    Ok(AuditReport {
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        dim: ds.dim(),
        numerical_rank: rank,
        target,
        attributes,
        intersectional,
    })
}
