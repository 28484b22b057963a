//! Gaussian policy: an MLP mean head plus a state-independent learnable
//! log-std vector.

use rand::Rng;

use crate::math::{clamp_log_std, GaussianHead, Mlp, MlpCache, MlpGrads};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct GaussianPolicy<F> {
    pub net: Mlp<F>,
    /// Raw log-std parameters; clamped when building a head.
    pub log_std: Vec<F>,
}

impl<F: Scalar> GaussianPolicy<F> {
    pub fn new(in_dim: usize, hidden: &[usize], out_dim: usize) -> Self {
        Self {
            net: Mlp::new(in_dim, hidden, out_dim),
            log_std: vec![F::zero(); out_dim],
        }
    }

    /// Orthogonal init with a small-gain output layer so initial actions stay
    /// near the PD reference posture.
    pub fn init_weights<R: Rng>(&mut self, rng: &mut R) {
        self.net.init_orthogonal(rng, std::f64::consts::SQRT_2, 0.01);
    }

    pub fn action_dim(&self) -> usize {
        self.net.out_dim()
    }

    pub fn head(&self, input: &[F]) -> Result<GaussianHead<F>> {
        let mean = self.net.forward(input)?;
        Ok(GaussianHead::new(mean, &self.log_std))
    }

    /// Head plus a cache for a later backward pass.
    pub fn head_cached(&self, input: &[F], cache: &mut MlpCache<F>) -> Result<GaussianHead<F>> {
        self.net.forward_cached(input, cache)?;
        let mean = self.net.cached_output(cache).to_vec();
        Ok(GaussianHead::new(mean, &self.log_std))
    }

    /// Accumulates gradients given d_loss/d_mean and d_loss/d_(clamped
    /// log-std); the clamp gate zeroes log-std gradients outside the bounds.
    pub fn backward(
        &self,
        cache: &MlpCache<F>,
        d_mean: &[F],
        d_log_std: &[F],
        grads: &mut PolicyGrads<F>,
    ) -> Result<()> {
        self.net.backward(cache, d_mean, &mut grads.net)?;
        for (i, (&raw, &g)) in self.log_std.iter().zip(d_log_std).enumerate() {
            if raw == clamp_log_std(raw) {
                grads.d_log_std[i] += g;
            }
        }
        Ok(())
    }

    pub fn tensors(&self, prefix: &str) -> Vec<(String, &[F])> {
        let mut out = self.net.tensors(prefix);
        out.push((format!("{prefix}.log_std"), self.log_std.as_slice()));
        out
    }

    pub fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut [F])> {
        let mut out = self.net.tensors_mut(prefix);
        out.push((format!("{prefix}.log_std"), self.log_std.as_mut_slice()));
        out
    }

    pub fn tensor_lens(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.net.tensor_shapes().iter().map(|s| s.iter().product()).collect();
        out.push(self.log_std.len());
        out
    }
}

/// Gradients mirroring a [`GaussianPolicy`].
#[derive(Debug, Clone)]
pub struct PolicyGrads<F> {
    pub net: MlpGrads<F>,
    pub d_log_std: Vec<F>,
}

impl<F: Scalar> PolicyGrads<F> {
    pub fn zeros_like(policy: &GaussianPolicy<F>) -> Self {
        Self {
            net: MlpGrads::zeros_like(&policy.net),
            d_log_std: vec![F::zero(); policy.log_std.len()],
        }
    }

    pub fn reset(&mut self) {
        self.net.reset();
        self.d_log_std.iter_mut().for_each(|g| *g = F::zero());
    }

    pub fn accumulate(&mut self, other: &PolicyGrads<F>) {
        self.net.accumulate(&other.net);
        for (a, b) in self.d_log_std.iter_mut().zip(&other.d_log_std) {
            *a += *b;
        }
    }

    pub fn scale(&mut self, factor: F) {
        self.net.scale(factor);
        self.d_log_std.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn tensors(&self, prefix: &str) -> Vec<(String, &[F])> {
        let mut out: Vec<(String, &[F])> = Vec::new();
        for (i, l) in self.net.layers.iter().enumerate() {
            out.push((format!("{prefix}.layer{i}.weight"), l.d_weights.as_slice()));
            out.push((format!("{prefix}.layer{i}.bias"), l.d_biases.as_slice()));
        }
        out.push((format!("{prefix}.log_std"), self.d_log_std.as_slice()));
        out
    }

    pub fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut [F])> {
        let mut out: Vec<(String, &mut [F])> = Vec::new();
        for (i, l) in self.net.layers.iter_mut().enumerate() {
            out.push((format!("{prefix}.layer{i}.weight"), l.d_weights.as_mut_slice()));
            out.push((format!("{prefix}.layer{i}.bias"), l.d_biases.as_mut_slice()));
        }
        out.push((format!("{prefix}.log_std"), self.d_log_std.as_mut_slice()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shared_actor_is_a_pure_function_of_its_input() {
        let mut policy: GaussianPolicy<f64> = GaussianPolicy::new(8, &[16], 4);
        policy.init_weights(&mut ChaCha8Rng::seed_from_u64(0));
        let x: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
        let a = policy.head(&x).unwrap();
        let b = policy.head(&x).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.log_std, b.log_std);
    }

    #[test]
    fn log_std_gradient_is_gated_by_the_clamp() {
        let mut policy: GaussianPolicy<f64> = GaussianPolicy::new(2, &[], 2);
        policy.log_std[0] = 0.0; // inside
        policy.log_std[1] = -9.0; // below the floor
        let mut cache = MlpCache::default();
        policy.head_cached(&[0.0, 0.0], &mut cache).unwrap();
        let mut grads = PolicyGrads::zeros_like(&policy);
        policy
            .backward(&cache, &[0.0, 0.0], &[1.0, 1.0], &mut grads)
            .unwrap();
        assert_eq!(grads.d_log_std, vec![1.0, 0.0]);
    }

    #[test]
    fn small_output_gain_keeps_initial_actions_near_zero() {
        let mut policy: GaussianPolicy<f64> = GaussianPolicy::new(10, &[32, 32], 4);
        policy.init_weights(&mut ChaCha8Rng::seed_from_u64(7));
        let x: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let head = policy.head(&x).unwrap();
        for m in &head.mean {
            assert!(m.abs() < 0.05, "initial mean {m} too large");
        }
    }
}
