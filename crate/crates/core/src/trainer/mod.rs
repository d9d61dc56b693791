//! Training loops for the debiasing objectives.
//!
//! Three objectives are implemented over mini-batches of representations
//! Z = sphere(φ(X)):
//!
//! - unconstrained: gradient ascent on R^c(Z, ε | Π^g) + R(Z, ε), removing
//!   the protected attribute while keeping everything else;
//! - constrained: gradient descent on CE(ŷ, y) + λ·[R(Z, ε) − R^c(Z, ε | Π)],
//!   preserving a target task while removing the protected attribute(s);
//! - collapse ablation: gradient ascent on R^c − R alone, which destroys
//!   most information and is kept here to make that failure reproducible.
//!
//! Rates are evaluated per mini-batch with the batch's own sample count.
//! Batches that happen to miss a protected class skip that class's R^c term
//! and bump a warning counter instead of failing the run.

mod corrupt;
mod membership;

pub use corrupt::corrupt_labels;
pub use membership::{n_partition_memberships, one_partition_membership};

use crate::error::{Error, Result};
use crate::neural::{
    cross_entropy, ClassifierHead, FeatureMap, Optimizer, OptimizerKind, ParamGrads,
};
use crate::rate::{grad_rate, grad_rate_mixed, rate, rate_mixed, Precision, RepresentationBatch};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Which objective a run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Unconstrained,
    Constrained,
    AblationUnconstrained,
}

/// How multiple protected attributes enter the constrained regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiAttrMode {
    /// One protected attribute (the only valid mode for a single attribute).
    Single,
    /// One membership matrix per attribute, regularizers summed.
    NPartition,
    /// Attributes concatenated into a single soft partition with weights 1/N.
    OnePartition,
}

/// Optimizer selection plus learning rate.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerSettings {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl OptimizerSettings {
    /// SGD, learning rate 0.001, momentum 0.9 (unconstrained default).
    pub fn momentum_sgd_default() -> Self {
        Self {
            kind: OptimizerKind::MomentumSgd { momentum: 0.9 },
            learning_rate: 0.001,
        }
    }

    /// Decoupled-weight-decay adaptive moments, learning rate 2e-5
    /// (constrained default).
    pub fn adaptive_default() -> Self {
        Self {
            kind: OptimizerKind::adaptive_default(0.0),
            learning_rate: 2e-5,
        }
    }
}

/// Full configuration of a debiasing run.
#[derive(Debug, Clone)]
pub struct DebiasConfig {
    pub objective: Objective,
    /// Regularizer strength; used by the constrained objective only.
    pub lambda: f64,
    pub epsilon_sq: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSettings,
    pub seed: u64,
    pub multi_attr_mode: MultiAttrMode,
    /// Number of affine layers in φ. Default: 4 unconstrained, 3 constrained.
    pub depth: Option<usize>,
    /// Hidden width of φ; defaults to the input dimension.
    pub hidden_width: Option<usize>,
    /// Output dimension of φ; defaults to the input dimension.
    pub output_dim: Option<usize>,
    /// Sphere-projection radius; defaults to sqrt(output dimension).
    pub sphere_radius: Option<f64>,
    /// Turn the output normalization off entirely.
    pub disable_output_norm: bool,
    /// Hidden width of the target classifier head.
    pub head_hidden: usize,
    /// Record a trace row every this many steps (the final step of a run is
    /// always recorded).
    pub log_every: usize,
}

impl DebiasConfig {
    pub fn unconstrained(seed: u64) -> Self {
        Self {
            objective: Objective::Unconstrained,
            lambda: 0.01,
            epsilon_sq: 0.5,
            epochs: 100,
            batch_size: 512,
            optimizer: OptimizerSettings::momentum_sgd_default(),
            seed,
            multi_attr_mode: MultiAttrMode::Single,
            depth: None,
            hidden_width: None,
            output_dim: None,
            sphere_radius: None,
            disable_output_norm: false,
            head_hidden: 64,
            log_every: 1,
        }
    }

    pub fn constrained(seed: u64) -> Self {
        Self {
            objective: Objective::Constrained,
            epochs: 20,
            optimizer: OptimizerSettings::adaptive_default(),
            ..Self::unconstrained(seed)
        }
    }

    pub fn ablation(seed: u64) -> Self {
        Self {
            objective: Objective::AblationUnconstrained,
            ..Self::unconstrained(seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if self.epsilon_sq <= 0.0 || !self.epsilon_sq.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "epsilon_sq must be positive, got {}",
                self.epsilon_sq
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidConfig("log_every must be positive".into()));
        }
        Ok(())
    }

    fn depth_default(&self) -> usize {
        match self.objective {
            Objective::Constrained => 3,
            _ => 4,
        }
    }

    /// Layer dimension chain for φ given the input width.
    fn feature_dims(&self, input_dim: usize) -> Vec<usize> {
        let depth = self.depth.unwrap_or_else(|| self.depth_default()).max(1);
        let hidden = self.hidden_width.unwrap_or(input_dim).max(2);
        let output = self.output_dim.unwrap_or(input_dim).max(2);
        let mut dims = vec![input_dim];
        for _ in 0..depth.saturating_sub(1) {
            dims.push(hidden);
        }
        dims.push(output);
        dims
    }

    fn sphere(&self, output_dim: usize) -> Option<f64> {
        if self.disable_output_norm {
            None
        } else {
            Some(
                self.sphere_radius
                    .unwrap_or_else(|| (output_dim as f64).sqrt()),
            )
        }
    }
}

/// One logged training step.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub iteration: usize,
    /// R(Z, ε) of the step's batch.
    pub rate: f64,
    /// R^c(Z, ε | Π) of the step's batch (summed over attributes in
    /// n-partition mode).
    pub rate_mixed: f64,
    /// Cross-entropy in nats; 0 for the unconstrained objectives.
    pub cross_entropy: f64,
    /// The scalar the optimizer actually follows (ascended or descended).
    pub objective: f64,
    pub wallclock_ms: f64,
}

/// Complete per-run trace, one record per logged step, iteration strictly
/// increasing. The final record is always the post-training evaluation of
/// the first batch, so reports can be recomputed from the checkpoint.
#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    /// Count of (batch, class) pairs whose R^c term was skipped because the
    /// batch did not contain that class.
    pub skipped_class_terms: u64,
}

impl TrainTrace {
    fn push(&mut self, record: TraceRecord) {
        debug_assert!(self
            .records
            .last()
            .map(|r| r.iteration < record.iteration)
            .unwrap_or(true));
        self.records.push(record);
    }

    /// CSV with header `iteration,R,R_c,CE,objective,wallclock_ms`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,R,R_c,CE,objective,wallclock_ms")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iteration, r.rate, r.rate_mixed, r.cross_entropy, r.objective, r.wallclock_ms
            )?;
        }
        Ok(())
    }
}

/// Result of a debiasing run.
#[derive(Debug)]
pub struct DebiasOutcome {
    pub feature_map: FeatureMap,
    pub head: Option<ClassifierHead>,
    pub trace: TrainTrace,
}

/// Gradient ascent on R^c + R (Algorithm: per epoch, normalize φ(X), build
/// the membership matrix from the protected labels, step φ).
pub fn train_unconstrained(
    x: &Array2<f64>,
    g_labels: &[usize],
    cfg: &DebiasConfig,
) -> Result<DebiasOutcome> {
    train_rate_only(x, g_labels, cfg, 1.0)
}

/// Gradient ascent on R^c − R alone. Collapses representations to a
/// low-rank subspace; exists to demonstrate why the R term matters.
pub fn train_ablation_unconstrained(
    x: &Array2<f64>,
    g_labels: &[usize],
    cfg: &DebiasConfig,
) -> Result<DebiasOutcome> {
    train_rate_only(x, g_labels, cfg, -1.0)
}

fn train_rate_only(
    x: &Array2<f64>,
    g_labels: &[usize],
    cfg: &DebiasConfig,
    rate_sign: f64,
) -> Result<DebiasOutcome> {
    cfg.validate()?;
    check_inputs(x, &[g_labels])?;
    let class_count = class_count(g_labels)?;
    let eps = Precision::new(cfg.epsilon_sq)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dims = cfg.feature_dims(x.ncols());
    let mut phi = FeatureMap::new(&dims, cfg.sphere(*dims.last().unwrap()), &mut rng)?;
    let mut opt = Optimizer::new(cfg.optimizer.kind, cfg.optimizer.learning_rate)?;
    let mut trace = TrainTrace::default();
    let start = Instant::now();
    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut iteration = 0usize;
    let total_steps = cfg.epochs * n.div_ceil(cfg.batch_size);

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            iteration += 1;
            let xb = take_rows(x, chunk);
            let gb: Vec<usize> = chunk.iter().map(|&i| g_labels[i]).collect();
            let (z, cache) = phi.forward(&xb)?;
            let batch = RepresentationBatch::new(z)?;
            let (membership, skipped) =
                membership::batch_membership(&gb, class_count)?;
            trace.skipped_class_terms += skipped;

            let r = rate(&batch, eps)?;
            let rc = rate_mixed(&batch, eps, &membership)?;
            let objective = rc + rate_sign * r;

            // Ascend: feed the negated objective gradient to a minimizer.
            let mut dz = grad_rate_mixed(&batch, eps, &membership)?;
            let dr = grad_rate(&batch, eps)?;
            dz.zip_mut_with(&dr, |a, &b| *a = -(*a + rate_sign * b));
            let (grads, _) = phi.backward(&cache, &dz)?;
            apply_step(&mut opt, &mut phi, None, &grads, None)?;

            if iteration % cfg.log_every == 0 || iteration == total_steps {
                trace.push(TraceRecord {
                    iteration,
                    rate: r,
                    rate_mixed: rc,
                    cross_entropy: 0.0,
                    objective,
                    wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
    }

    // Final evaluation record against the trained parameters, so the trace
    // tail can be recomputed offline from the checkpoint.
    let eval_rows: Vec<usize> = (0..n.min(cfg.batch_size)).collect();
    let xb = take_rows(x, &eval_rows);
    let gb: Vec<usize> = eval_rows.iter().map(|&i| g_labels[i]).collect();
    let z = phi.output(&xb)?;
    let batch = RepresentationBatch::new(z)?;
    let (membership, _) = membership::batch_membership(&gb, class_count)?;
    let r = rate(&batch, eps)?;
    let rc = rate_mixed(&batch, eps, &membership)?;
    trace.push(TraceRecord {
        iteration: iteration + 1,
        rate: r,
        rate_mixed: rc,
        cross_entropy: 0.0,
        objective: rc + rate_sign * r,
        wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
    });

    Ok(DebiasOutcome {
        feature_map: phi,
        head: None,
        trace,
    })
}

/// Joint training of φ and a classifier head minimizing
/// CE + λ·Σ_i [R − R^c(Π^{g_i})] (n-partition) or the single-partition
/// equivalent with the combined membership matrix.
pub fn train_constrained(
    x: &Array2<f64>,
    y_labels: &[usize],
    g_attrs: &[Vec<usize>],
    cfg: &DebiasConfig,
) -> Result<DebiasOutcome> {
    cfg.validate()?;
    if g_attrs.is_empty() {
        return Err(Error::InvalidInput("no protected attributes".into()));
    }
    let refs: Vec<&[usize]> = g_attrs.iter().map(|v| v.as_slice()).collect();
    check_inputs(x, &refs)?;
    if y_labels.len() != x.nrows() {
        return Err(Error::InvalidInput("target label length mismatch".into()));
    }
    if matches!(cfg.multi_attr_mode, MultiAttrMode::Single) && g_attrs.len() != 1 {
        return Err(Error::InvalidConfig(
            "single-attribute mode with multiple protected attributes".into(),
        ));
    }
    let y_classes = class_count(y_labels)?;
    let g_classes: Vec<usize> = g_attrs
        .iter()
        .map(|g| class_count(g))
        .collect::<Result<_>>()?;
    let eps = Precision::new(cfg.epsilon_sq)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dims = cfg.feature_dims(x.ncols());
    let out_dim = *dims.last().unwrap();
    let mut phi = FeatureMap::new(&dims, cfg.sphere(out_dim), &mut rng)?;
    let mut head = ClassifierHead::new(out_dim, cfg.head_hidden, y_classes, &mut rng)?;
    let mut opt = Optimizer::new(cfg.optimizer.kind, cfg.optimizer.learning_rate)?;
    let mut trace = TrainTrace::default();
    let start = Instant::now();
    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut iteration = 0usize;
    let total_steps = cfg.epochs * n.div_ceil(cfg.batch_size);

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            iteration += 1;
            let xb = take_rows(x, chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y_labels[i]).collect();
            let (z, phi_cache) = phi.forward(&xb)?;
            let batch = RepresentationBatch::new(z.clone())?;
            let (logits, head_cache) = head.forward(&z)?;
            let ce = cross_entropy(&logits, &yb)?;

            let (head_grads, mut dz) = head.backward(&head_cache, &ce.grad)?;

            let (r, rc_total, reg_grad, skipped) =
                constrained_regularizer(&batch, eps, cfg, g_attrs, &g_classes, chunk)?;
            trace.skipped_class_terms += skipped;
            if let Some(reg_grad) = &reg_grad {
                dz.zip_mut_with(reg_grad, |a, &b| *a += cfg.lambda * b);
            }

            let (phi_grads, _) = phi.backward(&phi_cache, &dz)?;
            apply_step(&mut opt, &mut phi, Some(&mut head), &phi_grads, Some(&head_grads))?;

            if iteration % cfg.log_every == 0 || iteration == total_steps {
                let attr_count = effective_attr_count(cfg, g_attrs.len());
                let objective = ce.loss + cfg.lambda * (attr_count * r - rc_total);
                trace.push(TraceRecord {
                    iteration,
                    rate: r,
                    rate_mixed: rc_total,
                    cross_entropy: ce.loss,
                    objective,
                    wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
                });
            }
        }
    }

    // Final deterministic evaluation with trained parameters (first rows).
    let eval_rows: Vec<usize> = (0..n.min(cfg.batch_size)).collect();
    let xb = take_rows(x, &eval_rows);
    let yb: Vec<usize> = eval_rows.iter().map(|&i| y_labels[i]).collect();
    let z = phi.output(&xb)?;
    let batch = RepresentationBatch::new(z.clone())?;
    let logits = head.logits(&z)?;
    let ce = cross_entropy(&logits, &yb)?;
    let (r, rc_total, _, _) =
        constrained_regularizer(&batch, eps, cfg, g_attrs, &g_classes, &eval_rows)?;
    let attr_count = effective_attr_count(cfg, g_attrs.len());
    trace.push(TraceRecord {
        iteration: iteration + 1,
        rate: r,
        rate_mixed: rc_total,
        cross_entropy: ce.loss,
        objective: ce.loss + cfg.lambda * (attr_count * r - rc_total),
        wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
    });

    Ok(DebiasOutcome {
        feature_map: phi,
        head: Some(head),
        trace,
    })
}

fn effective_attr_count(cfg: &DebiasConfig, attrs: usize) -> f64 {
    match cfg.multi_attr_mode {
        MultiAttrMode::NPartition => attrs as f64,
        _ => 1.0,
    }
}

/// Rate terms and d(R − R^c-part)/dZ of the constrained regularizer for one
/// batch; returns (R, total R^c, gradient of [Σ R^c_i − Σ R] negated ...
/// specifically the gradient of Σ_i (R − R^c_i) for n-partition, or
/// R − R^c(combined) otherwise), plus the skipped-class count.
fn constrained_regularizer(
    batch: &RepresentationBatch,
    eps: Precision,
    cfg: &DebiasConfig,
    g_attrs: &[Vec<usize>],
    g_classes: &[usize],
    rows: &[usize],
) -> Result<(f64, f64, Option<Array2<f64>>, u64)> {
    if cfg.lambda == 0.0 {
        // Regularizer vanishes; still report the single-attribute rates so
        // traces stay comparable across lambda values.
        let gb: Vec<usize> = rows.iter().map(|&i| g_attrs[0][i]).collect();
        let (membership, skipped) = membership::batch_membership(&gb, g_classes[0])?;
        let r = rate(batch, eps)?;
        let rc = rate_mixed(batch, eps, &membership)?;
        return Ok((r, rc, None, skipped));
    }
    let r = rate(batch, eps)?;
    let grad_r = grad_rate(batch, eps)?;
    let mut skipped_total = 0u64;
    match cfg.multi_attr_mode {
        MultiAttrMode::Single | MultiAttrMode::NPartition => {
            let attrs: &[Vec<usize>] = if matches!(cfg.multi_attr_mode, MultiAttrMode::Single) {
                &g_attrs[..1]
            } else {
                g_attrs
            };
            let mut rc_total = 0.0;
            let mut grad = Array2::<f64>::zeros(grad_r.raw_dim());
            for (a, attr) in attrs.iter().enumerate() {
                let gb: Vec<usize> = rows.iter().map(|&i| attr[i]).collect();
                let (membership, skipped) = membership::batch_membership(&gb, g_classes[a])?;
                skipped_total += skipped;
                rc_total += rate_mixed(batch, eps, &membership)?;
                let g_rc = grad_rate_mixed(batch, eps, &membership)?;
                grad.zip_mut_with(&g_rc, |acc, &v| *acc -= v);
                grad += &grad_r;
            }
            Ok((r, rc_total, Some(grad), skipped_total))
        }
        MultiAttrMode::OnePartition => {
            let batch_attrs: Vec<Vec<usize>> = g_attrs
                .iter()
                .map(|attr| rows.iter().map(|&i| attr[i]).collect())
                .collect();
            let (membership, skipped) =
                membership::one_partition_batch(&batch_attrs, g_classes)?;
            skipped_total += skipped;
            let rc = rate_mixed(batch, eps, &membership)?;
            let g_rc = grad_rate_mixed(batch, eps, &membership)?;
            let mut grad = grad_r;
            grad.zip_mut_with(&g_rc, |a, &b| *a -= b);
            Ok((r, rc, Some(grad), skipped_total))
        }
    }
}

fn apply_step(
    opt: &mut Optimizer,
    phi: &mut FeatureMap,
    head: Option<&mut ClassifierHead>,
    phi_grads: &ParamGrads,
    head_grads: Option<&ParamGrads>,
) -> Result<()> {
    let mut params = phi.param_slices_mut();
    let mut grads = phi_grads.flat();
    let mut head_params;
    if let Some(head) = head {
        head_params = head.param_slices_mut();
        params.append(&mut head_params);
        grads.extend(head_grads.expect("head gradients").flat());
    }
    opt.step(&mut params, &grads)
}

fn take_rows(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

fn check_inputs(x: &Array2<f64>, label_sets: &[&[usize]]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("empty training matrix".into()));
    }
    for labels in label_sets {
        if labels.len() != x.nrows() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} labels",
                x.nrows(),
                labels.len()
            )));
        }
    }
    Ok(())
}

/// Number of classes (max + 1) with the ≥2-distinct-classes requirement.
fn class_count(labels: &[usize]) -> Result<usize> {
    let max = *labels.iter().max().unwrap_or(&0);
    let mut seen = vec![false; max + 1];
    for &l in labels {
        seen[l] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::DegeneratePartition(
            "labels cover fewer than two classes".into(),
        ));
    }
    Ok(max + 1)
}
