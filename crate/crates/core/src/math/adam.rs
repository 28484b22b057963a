//! Adam optimizer over named parameter tensors.
//!
//! Ascent on an objective is implemented as descent on its negation: callers
//! hand in gradients of a loss and parameters move along `-grad`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkerError};
use crate::scalar::{real, Scalar};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-5,
        }
    }
}

/// First/second-moment accumulators mirroring a fixed list of tensors.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> AdamState<F> {
    /// `tensor_lens` fixes the number and flat length of each tensor; later
    /// `step` calls must present tensors in the same order.
    pub fn new(cfg: AdamConfig, tensor_lens: &[usize]) -> Self {
        Self {
            cfg,
            step: 0,
            m: tensor_lens.iter().map(|&n| vec![F::zero(); n]).collect(),
            v: tensor_lens.iter().map(|&n| vec![F::zero(); n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.cfg.learning_rate = lr;
    }

    /// One bias-corrected update over every tensor. `params` and `grads` must
    /// mirror the layout given at construction; `names` label tensors in
    /// divergence errors.
    pub fn step(
        &mut self,
        params: &mut [(String, &mut [F])],
        grads: &[(String, &[F])],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(WalkerError::contract(format!(
                "adam expected {} tensors, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((name, g), m) in grads.iter().zip(&self.m) {
            if g.len() != m.len() {
                return Err(WalkerError::contract(format!(
                    "adam tensor {name} length {} does not match state {}",
                    g.len(),
                    m.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(WalkerError::TrainingDivergence {
                    what: format!("gradient tensor {name}"),
                });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let b1 = real::<F>(self.cfg.beta1);
        let b2 = real::<F>(self.cfg.beta2);
        let lr = real::<F>(self.cfg.learning_rate);
        let eps = real::<F>(self.cfg.epsilon);
        let bc1 = F::one() - b1.powi(t);
        let bc2 = F::one() - b2.powi(t);

        for (ti, (_, p)) in params.iter_mut().enumerate() {
            let g = grads[ti].1;
            let m = &mut self.m[ti];
            let v = &mut self.v[ti];
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (F::one() - b1) * g[i];
                v[i] = b2 * v[i] + (F::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Flat views over the moment accumulators, for checkpointing.
    pub fn moment_tensors(&self, prefix: &str) -> Vec<(String, &[F])> {
        let mut out = Vec::with_capacity(self.m.len() * 2);
        for (i, (m, v)) in self.m.iter().zip(&self.v).enumerate() {
            out.push((format!("{prefix}.m{i}"), m.as_slice()));
            out.push((format!("{prefix}.v{i}"), v.as_slice()));
        }
        out
    }
}

/// Scales every gradient tensor so the global L2 norm does not exceed `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm<F: Scalar>(grads: &mut [(String, &mut [F])], max_norm: f64) -> f64 {
    let mut sum_sq = F::zero();
    for (_, g) in grads.iter() {
        for &x in g.iter() {
            sum_sq += x * x;
        }
    }
    let norm = sum_sq.sqrt().to_f64().unwrap_or(f64::INFINITY);
    if norm > max_norm && norm > 0.0 {
        let scale = real::<F>(max_norm / norm);
        for (_, g) in grads.iter_mut() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_tensor_state(lr: f64, n: usize) -> AdamState<f64> {
        AdamState::new(
            AdamConfig {
                learning_rate: lr,
                ..AdamConfig::default()
            },
            &[n],
        )
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut state = one_tensor_state(0.1, 3);
        let mut p = vec![1.0, -2.0, 0.5];
        let orig = p.clone();
        for _ in 0..5 {
            state
                .step(
                    &mut [("w".to_string(), p.as_mut_slice())],
                    &[("w".to_string(), &[0.0, 0.0, 0.0])],
                )
                .unwrap();
        }
        assert_eq!(p, orig);
        assert_eq!(state.step_count(), 5);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // Bias correction makes the first update m_hat/sqrt(v_hat) = g/|g|.
        let lr = 0.01;
        let mut state = one_tensor_state(lr, 2);
        let mut p = vec![0.0, 0.0];
        let g = [0.3, -4.0];
        state
            .step(
                &mut [("w".to_string(), p.as_mut_slice())],
                &[("w".to_string(), &g)],
            )
            .unwrap();
        for (pi, gi) in p.iter().zip(&g) {
            let expected = -lr * gi.signum() * (gi.abs() / (gi.abs() + 1e-5));
            assert!((pi - expected).abs() < 1e-12, "got {pi}, want {expected}");
        }
    }

    #[test]
    fn constant_gradient_moves_monotonically_against_it() {
        let mut state = one_tensor_state(0.05, 1);
        let mut p = vec![1.0];
        let mut prev = p[0];
        for _ in 0..20 {
            state
                .step(
                    &mut [("w".to_string(), p.as_mut_slice())],
                    &[("w".to_string(), &[2.5])],
                )
                .unwrap();
            assert!(p[0] < prev, "parameter must strictly decrease");
            prev = p[0];
        }
    }

    #[test]
    fn non_finite_gradient_names_the_tensor() {
        let mut state = AdamState::new(AdamConfig::default(), &[2, 2]);
        let mut a = vec![0.0, 0.0];
        let mut b = vec![0.0, 0.0];
        let err = state
            .step(
                &mut [
                    ("net.w".to_string(), a.as_mut_slice()),
                    ("net.b".to_string(), b.as_mut_slice()),
                ],
                &[
                    ("net.w".to_string(), &[1.0, 2.0]),
                    ("net.b".to_string(), &[f64::NAN, 0.0]),
                ],
            )
            .unwrap_err();
        match err {
            WalkerError::TrainingDivergence { what } => assert!(what.contains("net.b")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn global_norm_clip_rescales_to_the_bound() {
        let mut a = vec![3.0, 0.0];
        let mut b = vec![0.0, 4.0];
        let norm = clip_global_norm(
            &mut [
                ("a".to_string(), a.as_mut_slice()),
                ("b".to_string(), b.as_mut_slice()),
            ],
            1.0,
        );
        assert!((norm - 5.0).abs() < 1e-12);
        let new_norm = f64::sqrt(a[0] * a[0] + b[1] * b[1]);
        assert!((new_norm - 1.0).abs() < 1e-12);
    }
}
