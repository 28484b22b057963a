//! Rollout storage: per-agent trajectories over T steps and E parallel
//! environments, with bootstrap values for truncation.

use crate::error::{Result, WalkerError};
use crate::ppo::gae::{compute_gae, normalize_advantages};

/// Samples are indexed `env * t_len + t`. The shared reward at a sample is
/// identical across agents; observations, behavior log-probs, values,
/// advantages, and returns are per ratio-agent (or per member for
/// observations).
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub t_len: usize,
    pub n_members: usize,
    pub n_agents: usize,
    /// `[member][sample]` actor observations.
    pub member_obs: Vec<Vec<Vec<f64>>>,
    /// `[sample]` privileged critic observations.
    pub critic_obs: Vec<Vec<f64>>,
    /// `[group][sample]` full group actions.
    pub group_actions: Vec<Vec<Vec<f64>>>,
    /// `[agent][sample]` behavior log-probs of the agent's action slice.
    pub behavior_log_probs: Vec<Vec<f64>>,
    /// `[agent][sample]` critic head values at collection time.
    pub values: Vec<Vec<f64>>,
    /// `[sample]` shared team reward.
    pub rewards: Vec<f64>,
    /// `[sample]` terminal flags (falls); truncation at T bootstraps instead.
    pub dones: Vec<bool>,
    /// `[agent][env]` critic values of the post-rollout state.
    pub bootstrap_values: Vec<Vec<f64>>,
    /// Filled by [`compute_advantages`](Self::compute_advantages).
    pub advantages: Vec<Vec<f64>>,
    pub returns: Vec<Vec<f64>>,
    /// Returns of episodes completed during collection, for logging.
    pub episode_returns: Vec<f64>,
    /// Forward displacement accumulated per env over the window.
    pub window_displacement: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, t_len: usize, n_members: usize, n_groups: usize, n_agents: usize) -> Self {
        let samples = n_envs * t_len;
        Self {
            n_envs,
            t_len,
            n_members,
            n_agents,
            member_obs: vec![vec![Vec::new(); samples]; n_members],
            critic_obs: vec![Vec::new(); samples],
            group_actions: vec![vec![Vec::new(); samples]; n_groups],
            behavior_log_probs: vec![vec![0.0; samples]; n_agents],
            values: vec![vec![0.0; samples]; n_agents],
            rewards: vec![0.0; samples],
            dones: vec![false; samples],
            bootstrap_values: vec![vec![0.0; n_envs]; n_agents],
            advantages: vec![vec![0.0; samples]; n_agents],
            returns: vec![vec![0.0; samples]; n_agents],
            episode_returns: Vec::new(),
            window_displacement: vec![0.0; n_envs],
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_envs * self.t_len
    }

    pub fn sample_index(&self, env: usize, t: usize) -> usize {
        env * self.t_len + t
    }

    /// Per-agent GAE over each environment's window, then batch
    /// normalization pooled over all agents and samples. With
    /// `strict_shared`, all agents share the head-averaged advantage.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64, strict_shared: bool) -> Result<()> {
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(WalkerError::TrainingDivergence {
                what: "rollout rewards".to_string(),
            });
        }
        if strict_shared {
            // Head-averaged values give one shared advantage per sample.
            let samples = self.n_samples();
            let mut mean_values = vec![0.0; samples];
            let mut mean_bootstrap = vec![0.0; self.n_envs];
            for agent in 0..self.n_agents {
                for s in 0..samples {
                    mean_values[s] += self.values[agent][s] / self.n_agents as f64;
                }
                for e in 0..self.n_envs {
                    mean_bootstrap[e] += self.bootstrap_values[agent][e] / self.n_agents as f64;
                }
            }
            for e in 0..self.n_envs {
                let lo = self.sample_index(e, 0);
                let hi = lo + self.t_len;
                let (adv, _) = compute_gae(
                    &self.rewards[lo..hi],
                    &mean_values[lo..hi],
                    &self.dones[lo..hi],
                    mean_bootstrap[e],
                    gamma,
                    lambda,
                );
                for agent in 0..self.n_agents {
                    // Returns still target each head's own value baseline.
                    for (t, a) in adv.iter().enumerate() {
                        self.advantages[agent][lo + t] = *a;
                        self.returns[agent][lo + t] = *a + mean_values[lo + t];
                    }
                }
            }
        } else {
            for agent in 0..self.n_agents {
                for e in 0..self.n_envs {
                    let lo = self.sample_index(e, 0);
                    let hi = lo + self.t_len;
                    let (adv, ret) = compute_gae(
                        &self.rewards[lo..hi],
                        &self.values[agent][lo..hi],
                        &self.dones[lo..hi],
                        self.bootstrap_values[agent][e],
                        gamma,
                        lambda,
                    );
                    self.advantages[agent][lo..hi].copy_from_slice(&adv);
                    self.returns[agent][lo..hi].copy_from_slice(&ret);
                }
            }
        }
        // Pooled normalization across agents and samples.
        let samples = self.n_samples();
        let mut pooled = Vec::with_capacity(self.n_agents * samples);
        for agent in 0..self.n_agents {
            pooled.extend_from_slice(&self.advantages[agent]);
        }
        normalize_advantages(&mut pooled);
        for agent in 0..self.n_agents {
            self.advantages[agent]
                .copy_from_slice(&pooled[agent * samples..(agent + 1) * samples]);
        }
        Ok(())
    }

    /// Mean over environments of the summed window reward.
    pub fn mean_window_return(&self) -> f64 {
        let per_env: f64 = self.rewards.iter().sum();
        per_env / self.n_envs as f64
    }

    /// Explained variance of the collection-time values against returns.
    pub fn explained_variance(&self) -> f64 {
        let mut res_var = 0.0;
        let mut ret_mean = 0.0;
        let mut n = 0.0;
        for agent in 0..self.n_agents {
            for s in 0..self.n_samples() {
                ret_mean += self.returns[agent][s];
                n += 1.0;
            }
        }
        ret_mean /= n;
        let mut ret_var = 0.0;
        for agent in 0..self.n_agents {
            for s in 0..self.n_samples() {
                let r = self.returns[agent][s];
                ret_var += (r - ret_mean).powi(2);
                res_var += (r - self.values[agent][s]).powi(2);
            }
        }
        if ret_var <= 0.0 {
            return 0.0;
        }
        1.0 - res_var / ret_var
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_holds_exactly_t_transitions_per_env() {
        let buf = RolloutBuffer::new(1, 48, 2, 1, 2);
        assert_eq!(buf.n_samples(), 48);
        assert_eq!(buf.rewards.len(), 48);
        assert_eq!(buf.values[0].len(), 48);
    }

    #[test]
    fn advantages_normalize_across_the_whole_batch() {
        let mut buf = RolloutBuffer::new(2, 8, 2, 1, 2);
        for s in 0..16 {
            buf.rewards[s] = (s as f64 * 0.37).sin();
            for agent in 0..2 {
                buf.values[agent][s] = (s as f64 * 0.11).cos();
            }
        }
        buf.compute_advantages(0.99, 0.95, false).unwrap();
        let mut all: Vec<f64> = Vec::new();
        for agent in 0..2 {
            all.extend_from_slice(&buf.advantages[agent]);
        }
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let std = (all.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-6);
        assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn strict_shared_advantages_are_identical_across_agents() {
        let mut buf = RolloutBuffer::new(1, 6, 2, 1, 2);
        for s in 0..6 {
            buf.rewards[s] = s as f64;
            buf.values[0][s] = 0.5 * s as f64;
            buf.values[1][s] = -0.25 * s as f64;
        }
        buf.bootstrap_values[0][0] = 1.0;
        buf.bootstrap_values[1][0] = 3.0;
        buf.compute_advantages(0.9, 0.8, true).unwrap();
        assert_eq!(buf.advantages[0], buf.advantages[1]);
    }

    #[test]
    fn zero_values_make_returns_discounted_reward_sums() {
        let mut buf = RolloutBuffer::new(1, 4, 1, 1, 1);
        buf.rewards = vec![1.0, 1.0, 1.0, 1.0];
        buf.compute_advantages(0.5, 1.0, false).unwrap();
        // Zero critic: return_t = sum_k gamma^k r_{t+k}.
        let want = [1.875, 1.75, 1.5, 1.0];
        for t in 0..4 {
            assert!((buf.returns[0][t] - want[t]).abs() < 1e-12);
        }
    }
}
