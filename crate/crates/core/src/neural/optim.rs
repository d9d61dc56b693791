//! First-order optimizers over flat parameter slices: SGD with momentum and
//! adaptive moment estimation with decoupled weight decay.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    MomentumSgd {
        momentum: f64,
    },
    /// Bias-corrected first/second moments; weight decay applied directly to
    /// the parameters, not through the gradient.
    DecoupledAdaptive {
        beta1: f64,
        beta2: f64,
        weight_decay: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn adaptive_default(weight_decay: f64) -> Self {
        OptimizerKind::DecoupledAdaptive {
            beta1: 0.9,
            beta2: 0.999,
            weight_decay,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state. Accumulators are keyed by tensor position, so the same
/// slice order must be used on every step.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step_count: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !learning_rate.is_finite() || learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            kind,
            learning_rate,
            first: Vec::new(),
            second: Vec::new(),
            step_count: 0,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// One update over the full parameter list. Accumulators are allocated
    /// lazily on the first call and must shape-match afterwards.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::InvalidInput(format!(
                "{} parameter tensors but {} gradient tensors",
                params.len(),
                grads.len()
            )));
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            if matches!(self.kind, OptimizerKind::DecoupledAdaptive { .. }) {
                self.second = params.iter().map(|p| vec![0.0; p.len()]).collect();
            }
        }
        if self.first.len() != params.len() {
            return Err(Error::InvalidState(
                "optimizer state does not match parameter list".into(),
            ));
        }
        self.step_count += 1;
        for (ti, (p, g)) in params.iter_mut().zip(grads.iter()).enumerate() {
            if p.len() != g.len() || p.len() != self.first[ti].len() {
                return Err(Error::InvalidInput(format!(
                    "tensor {ti}: parameter/gradient/state lengths differ"
                )));
            }
            match self.kind {
                OptimizerKind::MomentumSgd { momentum } => {
                    let v = &mut self.first[ti];
                    for i in 0..p.len() {
                        v[i] = momentum * v[i] + g[i];
                        p[i] -= self.learning_rate * v[i];
                    }
                }
                OptimizerKind::DecoupledAdaptive {
                    beta1,
                    beta2,
                    weight_decay,
                    epsilon,
                } => {
                    let t = self.step_count as f64;
                    let c1 = 1.0 - beta1.powf(t);
                    let c2 = 1.0 - beta2.powf(t);
                    let m = &mut self.first[ti];
                    let v = &mut self.second[ti];
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= self.learning_rate
                            * (m_hat / (v_hat.sqrt() + epsilon) + weight_decay * p[i]);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_sgd_parameters_unchanged() {
        let mut opt = Optimizer::new(OptimizerKind::MomentumSgd { momentum: 0.9 }, 0.1).unwrap();
        let mut p = vec![1.0, -2.0];
        let g = vec![0.0, 0.0];
        opt.step(&mut [&mut p], &[&g]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn zero_gradient_leaves_adaptive_parameters_unchanged_without_decay() {
        let mut opt = Optimizer::new(OptimizerKind::adaptive_default(0.0), 0.1).unwrap();
        let mut p = vec![0.5, 0.25];
        let g = vec![0.0, 0.0];
        opt.step(&mut [&mut p], &[&g]).unwrap();
        assert_eq!(p, vec![0.5, 0.25]);
    }

    #[test]
    fn single_sgd_step_moves_by_learning_rate() {
        let mut opt = Optimizer::new(OptimizerKind::MomentumSgd { momentum: 0.9 }, 0.1).unwrap();
        let mut p = vec![1.0];
        opt.step(&mut [&mut p], &[&[1.0]]).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn two_sgd_steps_accumulate_momentum() {
        // v1 = 1, step 0.1; v2 = 0.9 + 1 = 1.9, step 0.19; total 0.29.
        let mut opt = Optimizer::new(OptimizerKind::MomentumSgd { momentum: 0.9 }, 0.1).unwrap();
        let mut p = vec![1.0];
        opt.step(&mut [&mut p], &[&[1.0]]).unwrap();
        opt.step(&mut [&mut p], &[&[1.0]]).unwrap();
        assert!((p[0] - 0.71).abs() < 1e-12, "{}", p[0]);
    }

    #[test]
    fn adaptive_first_step_is_learning_rate_sized() {
        // With bias correction the first update is lr·g/(√(g²) + eps).
        let mut opt = Optimizer::new(OptimizerKind::adaptive_default(0.0), 0.01).unwrap();
        let mut p = vec![0.0];
        opt.step(&mut [&mut p], &[&[3.0]]).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-6, "{}", p[0]);
    }

    #[test]
    fn decoupled_decay_shrinks_parameters_even_with_zero_gradient() {
        let mut opt = Optimizer::new(OptimizerKind::adaptive_default(0.1), 0.5).unwrap();
        let mut p = vec![2.0];
        opt.step(&mut [&mut p], &[&[0.0]]).unwrap();
        assert!((p[0] - 2.0 * (1.0 - 0.5 * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let mut opt = Optimizer::new(OptimizerKind::MomentumSgd { momentum: 0.0 }, 0.1).unwrap();
        let mut p = vec![0.0, 0.0];
        assert!(opt.step(&mut [&mut p], &[&[1.0]]).is_err());
    }
}
