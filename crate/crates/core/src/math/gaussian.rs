//! Diagonal-Gaussian action head: sampling, log-densities, entropy.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, WalkerError};
use crate::scalar::{real, Scalar};

/// Clamp bounds for the state-independent log standard deviation.
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;

const LOG_TWO_PI: f64 = 1.8378770664093453;

/// A diagonal Gaussian over actions: independent per dimension.
///
/// `log_std` entries are already clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
#[derive(Debug, Clone)]
pub struct GaussianHead<F> {
    pub mean: Vec<F>,
    pub log_std: Vec<F>,
}

impl<F: Scalar> GaussianHead<F> {
    /// Builds a head, clamping the raw log-std parameters.
    pub fn new(mean: Vec<F>, raw_log_std: &[F]) -> Self {
        debug_assert_eq!(mean.len(), raw_log_std.len());
        let log_std = raw_log_std.iter().map(|&v| clamp_log_std(v)).collect();
        Self { mean, log_std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log-density of `action`: sum over dimensions of
    /// `-0.5 ((a - mu) / sigma)^2 - log sigma - 0.5 log(2 pi)`.
    pub fn log_prob(&self, action: &[F]) -> Result<F> {
        self.check_len(action.len())?;
        Ok(self.log_prob_slice(action, 0, self.dim()))
    }

    /// Log-density restricted to dimensions `[start, start + len)`.
    ///
    /// `action` indexes the same range: `action[start + i]` pairs with
    /// `mean[start + i]`. The diagonal covariance makes the joint density
    /// factorize, so the full log-prob is the sum of disjoint slices.
    pub fn log_prob_slice(&self, action: &[F], start: usize, len: usize) -> F {
        let half = real::<F>(0.5);
        let half_log_two_pi = real::<F>(0.5 * LOG_TWO_PI);
        let mut total = F::zero();
        for d in start..start + len {
            let sigma = self.log_std[d].exp();
            let z = (action[d] - self.mean[d]) / sigma;
            total += -half * z * z - self.log_std[d] - half_log_two_pi;
        }
        total
    }

    /// Samples `mu + sigma * z` with `z` standard normal; returns the action
    /// and its log-density. Bit-reproducible per seeded rng.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Vec<F>, F) {
        let action: Vec<F> = self
            .mean
            .iter()
            .zip(&self.log_std)
            .map(|(&mu, &ls)| mu + ls.exp() * real::<F>(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let lp = self.log_prob_slice(&action, 0, self.dim());
        (action, lp)
    }

    /// Differential entropy: sum over dimensions of `log sigma + 0.5 log(2 pi e)`.
    pub fn entropy(&self) -> F {
        let half_log_two_pi_e = real::<F>(0.5 * (LOG_TWO_PI + 1.0));
        self.log_std
            .iter()
            .map(|&ls| ls + half_log_two_pi_e)
            .sum()
    }

    /// Gradient of `log_prob(action)` with respect to the mean, per dimension:
    /// `(a - mu) / sigma^2`.
    pub fn d_log_prob_d_mean(&self, action: &[F], d: usize) -> F {
        let sigma = self.log_std[d].exp();
        (action[d] - self.mean[d]) / (sigma * sigma)
    }

    /// Gradient of `log_prob(action)` with respect to the clamped log-std,
    /// per dimension: `((a - mu) / sigma)^2 - 1`.
    pub fn d_log_prob_d_log_std(&self, action: &[F], d: usize) -> F {
        let sigma = self.log_std[d].exp();
        let z = (action[d] - self.mean[d]) / sigma;
        z * z - F::one()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(WalkerError::contract(format!(
                "action length {n} does not match head dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn clamp_log_std<F: Scalar>(v: F) -> F {
    v.max(real::<F>(LOG_STD_MIN)).min(real::<F>(LOG_STD_MAX))
}
