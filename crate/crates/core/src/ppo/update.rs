//! Policy optimization: the clipped multi-agent surrogate with per-agent
//! importance ratios summed over agents, the multi-head critic regression,
//! and the conventional single-agent PPO update used by the baseline.
//!
//! Gradient accumulation is chunked with a fixed chunk size and reduced in
//! chunk order, so results are bitwise reproducible for any thread count.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::morphology::MorphologyConfig;
use crate::error::{Result, WalkerError};
use crate::math::{clip_global_norm, AdamState, Mlp, MlpCache, MlpGrads};
use crate::ppo::buffer::RolloutBuffer;
use crate::ppo::policy::{GaussianPolicy, PolicyGrads};
use crate::ppo::roster::AgentRoster;

/// Samples per deterministic accumulation chunk.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub strict_shared_advantage: bool,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            entropy_coef: 0.005,
            value_coef: 1.0,
            max_grad_norm: 1.0,
            epochs: 5,
            minibatches: 4,
            strict_shared_advantage: false,
        }
    }
}

/// Aggregate statistics of one update.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub ratio_mean: f64,
    pub ratio_max: f64,
    pub explained_variance: f64,
    /// Max |ratio - 1| over the first minibatch before any gradient step.
    pub first_pass_ratio_error: f64,
}

/// The clipped surrogate: `min(r A, clip(r, 1-eps, 1+eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    (ratio * advantage).min(clipped)
}

/// Precomputed index maps from the roster onto buffer rows.
#[derive(Debug, Clone)]
pub struct UpdateContext {
    pub roster: AgentRoster,
    pub morph: MorphologyConfig,
    /// Per group: member rows in `buffer.member_obs`.
    pub group_member_idx: Vec<Vec<usize>>,
    /// Per group: ratio-agent rows in the buffer's per-agent arrays.
    pub group_agent_idx: Vec<Vec<usize>>,
    /// Per group: each ratio agent's slice of the group action.
    pub group_slices: Vec<Vec<Range<usize>>>,
}

impl UpdateContext {
    pub fn new(roster: AgentRoster, morph: MorphologyConfig) -> Self {
        let members = roster.all_members();
        let member_row = |id| members.iter().position(|m| *m == id).unwrap();
        let mut group_member_idx = Vec::new();
        let mut group_agent_idx = Vec::new();
        let mut group_slices = Vec::new();
        let mut agent_cursor = 0;
        for g in &roster.groups {
            group_member_idx.push(g.members.iter().map(|m| member_row(*m)).collect());
            let n = g.n_ratio_agents();
            group_agent_idx.push((agent_cursor..agent_cursor + n).collect());
            agent_cursor += n;
            group_slices.push(g.ratio_slices(&morph));
        }
        Self {
            roster,
            morph,
            group_member_idx,
            group_agent_idx,
            group_slices,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.roster.n_agents()
    }
}

/// Gradients and statistics accumulated over a batch of samples. Losses and
/// gradients are plain sums over the processed samples.
pub struct BatchAccum {
    pub actor_grads: Vec<PolicyGrads<f64>>,
    pub critic_grads: MlpGrads<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_events: usize,
    pub ratio_sum: f64,
    pub ratio_max: f64,
    pub ratio_dev_max: f64,
    pub n_ratios: usize,
}

impl BatchAccum {
    pub fn new(actors: &[GaussianPolicy<f64>], critic: &Mlp<f64>) -> Self {
        Self {
            actor_grads: actors.iter().map(PolicyGrads::zeros_like).collect(),
            critic_grads: MlpGrads::zeros_like(critic),
            policy_loss: 0.0,
            value_loss: 0.0,
            entropy: 0.0,
            clip_events: 0,
            ratio_sum: 0.0,
            ratio_max: f64::NEG_INFINITY,
            ratio_dev_max: 0.0,
            n_ratios: 0,
        }
    }

    pub fn merge(&mut self, other: &BatchAccum) {
        for (a, b) in self.actor_grads.iter_mut().zip(&other.actor_grads) {
            a.accumulate(b);
        }
        self.critic_grads.accumulate(&other.critic_grads);
        self.policy_loss += other.policy_loss;
        self.value_loss += other.value_loss;
        self.entropy += other.entropy;
        self.clip_events += other.clip_events;
        self.ratio_sum += other.ratio_sum;
        self.ratio_max = self.ratio_max.max(other.ratio_max);
        self.ratio_dev_max = self.ratio_dev_max.max(other.ratio_dev_max);
        self.n_ratios += other.n_ratios;
    }
}

/// One sample's contribution to the cooperative objective.
fn mash_sample(
    s: usize,
    buffer: &RolloutBuffer,
    ctx: &UpdateContext,
    actors: &[GaussianPolicy<f64>],
    critic: &Mlp<f64>,
    cfg: &UpdateConfig,
    acc: &mut BatchAccum,
) -> Result<()> {
    let eps = cfg.clip_eps;
    let mut surrogate_sum = 0.0;
    let mut entropy_sum = 0.0;

    for (g, group) in ctx.roster.groups.iter().enumerate() {
        let actor = &actors[g];
        let action = &buffer.group_actions[g][s];
        let slices = &ctx.group_slices[g];
        let agents = &ctx.group_agent_idx[g];
        let evals: Vec<(Vec<f64>, usize)> = if group.per_limb {
            // One evaluation per member on its own observation.
            ctx.group_member_idx[g]
                .iter()
                .map(|&row| (buffer.member_obs[row][s].clone(), 1))
                .collect()
        } else {
            let mut input = Vec::new();
            for &row in &ctx.group_member_idx[g] {
                input.extend_from_slice(&buffer.member_obs[row][s]);
            }
            vec![(input, slices.len())]
        };

        let mut agent_iter = agents.iter().zip(slices.iter());
        for (input, n_slices) in &evals {
            let mut cache = MlpCache::default();
            let head = actor.head_cached(input, &mut cache)?;
            entropy_sum += head.entropy();
            let mut d_mean = vec![0.0; head.dim()];
            let mut d_log_std = vec![0.0; head.dim()];
            for _ in 0..*n_slices {
                let (&agent, slice) = agent_iter.next().expect("slice/agent alignment");
                // Per-limb heads cover one slice starting at zero.
                let local = if group.per_limb { 0..slice.len() } else { slice.clone() };
                let act_slice = &action[slice.clone()];
                let new_lp = if group.per_limb {
                    head.log_prob_slice(act_slice, 0, act_slice.len())
                } else {
                    head.log_prob_slice(action, local.start, local.len())
                };
                let old_lp = buffer.behavior_log_probs[agent][s];
                let ratio = (new_lp - old_lp).exp();
                if !ratio.is_finite() {
                    return Err(WalkerError::TrainingDivergence {
                        what: format!("importance ratio (group {})", group.name),
                    });
                }
                let adv = buffer.advantages[agent][s];
                let unclipped = ratio * adv;
                let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
                let (surr, d_surr_d_lp) = if unclipped <= clipped {
                    (unclipped, unclipped)
                } else {
                    (clipped, 0.0)
                };
                surrogate_sum += surr;
                if ratio < 1.0 - eps || ratio > 1.0 + eps {
                    acc.clip_events += 1;
                }
                acc.ratio_sum += ratio;
                acc.ratio_max = acc.ratio_max.max(ratio);
                acc.ratio_dev_max = acc.ratio_dev_max.max((ratio - 1.0).abs());
                acc.n_ratios += 1;

                // d(-surr)/d new_lp, routed into the slice dimensions.
                let d_lp = -d_surr_d_lp;
                for (k, d) in local.clone().enumerate() {
                    let a_d = act_slice[k];
                    let sigma = head.log_std[d].exp();
                    let z = (a_d - head.mean[d]) / sigma;
                    d_mean[d] += d_lp * z / sigma;
                    d_log_std[d] += d_lp * (z * z - 1.0);
                }
            }
            // Entropy bonus: dH/d log_std = 1 per dimension.
            for g_d in d_log_std.iter_mut() {
                *g_d += -cfg.entropy_coef;
            }
            actor.backward(&cache, &d_mean, &d_log_std, &mut acc.actor_grads[g])?;
        }
    }

    acc.policy_loss += -(surrogate_sum + cfg.entropy_coef * entropy_sum);
    acc.entropy += entropy_sum;

    // Multi-head critic: every head regresses its own return target.
    let n_agents = ctx.n_agents() as f64;
    let mut cache = MlpCache::default();
    critic.forward_cached(&buffer.critic_obs[s], &mut cache)?;
    let values = critic.cached_output(&cache).to_vec();
    let mut d_out = vec![0.0; values.len()];
    let mut sample_value_loss = 0.0;
    for (i, d) in d_out.iter_mut().enumerate() {
        let target = buffer.returns[i][s];
        let err = values[i] - target;
        sample_value_loss += err * err / n_agents;
        *d = cfg.value_coef * 2.0 * err / n_agents;
    }
    acc.value_loss += cfg.value_coef * sample_value_loss;
    critic.backward(&cache, &d_out, &mut acc.critic_grads)?;
    Ok(())
}

/// One sample's contribution to the single-agent PPO objective: one ratio
/// over the full action, a single critic head.
fn single_agent_sample(
    s: usize,
    buffer: &RolloutBuffer,
    ctx: &UpdateContext,
    actor: &GaussianPolicy<f64>,
    critic: &Mlp<f64>,
    cfg: &UpdateConfig,
    acc: &mut BatchAccum,
) -> Result<()> {
    let eps = cfg.clip_eps;
    let action = &buffer.group_actions[0][s];
    let mut input = Vec::new();
    for &row in &ctx.group_member_idx[0] {
        input.extend_from_slice(&buffer.member_obs[row][s]);
    }
    let mut cache = MlpCache::default();
    let head = actor.head_cached(&input, &mut cache)?;
    let entropy = head.entropy();
    let new_lp = head.log_prob_slice(action, 0, action.len());
    let old_lp = buffer.behavior_log_probs[0][s];
    let ratio = (new_lp - old_lp).exp();
    if !ratio.is_finite() {
        return Err(WalkerError::TrainingDivergence {
            what: "importance ratio (single-agent)".to_string(),
        });
    }
    let adv = buffer.advantages[0][s];
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    let (surr, d_surr_d_lp) = if unclipped <= clipped {
        (unclipped, unclipped)
    } else {
        (clipped, 0.0)
    };
    if ratio < 1.0 - eps || ratio > 1.0 + eps {
        acc.clip_events += 1;
    }
    acc.ratio_sum += ratio;
    acc.ratio_max = acc.ratio_max.max(ratio);
    acc.ratio_dev_max = acc.ratio_dev_max.max((ratio - 1.0).abs());
    acc.n_ratios += 1;

    let d_lp = -d_surr_d_lp;
    let mut d_mean = vec![0.0; head.dim()];
    let mut d_log_std = vec![0.0; head.dim()];
    for d in 0..head.dim() {
        let sigma = head.log_std[d].exp();
        let z = (action[d] - head.mean[d]) / sigma;
        d_mean[d] += d_lp * z / sigma;
        d_log_std[d] += d_lp * (z * z - 1.0);
    }
    for g_d in d_log_std.iter_mut() {
        *g_d += -cfg.entropy_coef;
    }
    actor.backward(&cache, &d_mean, &d_log_std, &mut acc.actor_grads[0])?;

    // Accumulate through the same zero-seeded sums as the cooperative path
    // so an N=1 roster reproduces these losses bitwise.
    let surrogate_sum = 0.0 + surr;
    let entropy_sum = 0.0 + entropy;
    acc.policy_loss += -(surrogate_sum + cfg.entropy_coef * entropy_sum);
    acc.entropy += entropy_sum;

    let mut ccache = MlpCache::default();
    critic.forward_cached(&buffer.critic_obs[s], &mut ccache)?;
    let value = critic.cached_output(&ccache)[0];
    let target = buffer.returns[0][s];
    let err = value - target;
    let sample_value_loss = err * err / 1.0;
    acc.value_loss += cfg.value_coef * sample_value_loss;
    let d_out = vec![cfg.value_coef * 2.0 * err / 1.0];
    critic.backward(&ccache, &d_out, &mut acc.critic_grads)?;
    Ok(())
}

/// One gradient pass over `samples`: losses, statistics, and parameter
/// gradients summed over the batch. Accumulation is chunked with a fixed
/// chunk size and reduced in chunk order, so the result is bitwise
/// reproducible for any thread count.
pub fn batch_gradients(
    buffer: &RolloutBuffer,
    ctx: &UpdateContext,
    actors: &[GaussianPolicy<f64>],
    critic: &Mlp<f64>,
    cfg: &UpdateConfig,
    samples: &[usize],
    single_agent: bool,
) -> Result<BatchAccum> {
    let chunks: Vec<BatchAccum> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = BatchAccum::new(actors, critic);
            for &s in chunk {
                let r = if single_agent {
                    single_agent_sample(s, buffer, ctx, &actors[0], critic, cfg, &mut acc)
                } else {
                    mash_sample(s, buffer, ctx, actors, critic, cfg, &mut acc)
                };
                if r.is_err() {
                    // Surface divergence through a poisoned loss.
                    acc.policy_loss = f64::NAN;
                    break;
                }
            }
            acc
        })
        .collect();
    let mut acc = BatchAccum::new(actors, critic);
    for c in &chunks {
        acc.merge(c);
    }
    Ok(acc)
}

/// Shared epoch/minibatch driver.
fn run_update(
    buffer: &mut RolloutBuffer,
    ctx: &UpdateContext,
    actors: &mut [GaussianPolicy<f64>],
    critic: &mut Mlp<f64>,
    actor_opts: &mut [AdamState<f64>],
    critic_opt: &mut AdamState<f64>,
    cfg: &UpdateConfig,
    rng: &mut ChaCha8Rng,
    single_agent: bool,
) -> Result<UpdateStats> {
    buffer.compute_advantages(cfg.gamma, cfg.gae_lambda, cfg.strict_shared_advantage)?;
    let explained_variance = buffer.explained_variance();

    let n = buffer.n_samples();
    let minibatch_size = n.div_ceil(cfg.minibatches);
    let mut stats = UpdateStats {
        explained_variance,
        ratio_max: f64::NEG_INFINITY,
        ..UpdateStats::default()
    };
    let mut total_policy_loss = 0.0;
    let mut total_value_loss = 0.0;
    let mut total_entropy = 0.0;
    let mut total_clip_events = 0usize;
    let mut total_ratio_sum = 0.0;
    let mut total_ratios = 0usize;
    let mut n_minibatches = 0usize;
    let mut first_pass_recorded = false;

    let mut indices: Vec<usize> = (0..n).collect();
    for _epoch in 0..cfg.epochs {
        indices.shuffle(rng);
        for mb in indices.chunks(minibatch_size) {
            let mut acc = batch_gradients(buffer, ctx, actors, critic, cfg, mb, single_agent)?;
            if !acc.policy_loss.is_finite() || !acc.value_loss.is_finite() {
                return Err(WalkerError::TrainingDivergence {
                    what: format!("minibatch {n_minibatches} loss"),
                });
            }

            let scale = 1.0 / mb.len() as f64;
            for g in &mut acc.actor_grads {
                g.scale(scale);
            }
            acc.critic_grads.scale(scale);

            if !first_pass_recorded {
                stats.first_pass_ratio_error = acc.ratio_dev_max;
                first_pass_recorded = true;
            }

            for (g, actor) in actors.iter_mut().enumerate() {
                let mut grads = acc.actor_grads[g].tensors_mut("g");
                clip_global_norm(&mut grads, cfg.max_grad_norm);
                let grad_view: Vec<(String, &[f64])> =
                    acc.actor_grads[g].tensors("g").into_iter().collect();
                let mut params = actor.tensors_mut("g");
                actor_opts[g].step(&mut params, &grad_view)?;
            }
            {
                let mut grads: Vec<(String, &mut [f64])> = Vec::new();
                for (i, l) in acc.critic_grads.layers.iter_mut().enumerate() {
                    grads.push((format!("critic.layer{i}.weight"), l.d_weights.as_mut_slice()));
                    grads.push((format!("critic.layer{i}.bias"), l.d_biases.as_mut_slice()));
                }
                clip_global_norm(&mut grads, cfg.max_grad_norm);
                let mut grad_view: Vec<(String, &[f64])> = Vec::new();
                for (i, l) in acc.critic_grads.layers.iter().enumerate() {
                    grad_view.push((format!("critic.layer{i}.weight"), l.d_weights.as_slice()));
                    grad_view.push((format!("critic.layer{i}.bias"), l.d_biases.as_slice()));
                }
                let mut params = critic.tensors_mut("critic");
                critic_opt.step(&mut params, &grad_view)?;
            }

            total_policy_loss += acc.policy_loss * scale;
            total_value_loss += acc.value_loss * scale;
            total_entropy += acc.entropy * scale;
            total_clip_events += acc.clip_events;
            total_ratio_sum += acc.ratio_sum;
            total_ratios += acc.n_ratios;
            stats.ratio_max = stats.ratio_max.max(acc.ratio_max);
            n_minibatches += 1;
        }
    }

    stats.policy_loss = total_policy_loss / n_minibatches as f64;
    stats.value_loss = total_value_loss / n_minibatches as f64;
    stats.entropy = total_entropy / n_minibatches as f64;
    stats.clip_fraction = total_clip_events as f64 / total_ratios as f64;
    stats.ratio_mean = total_ratio_sum / total_ratios as f64;
    Ok(stats)
}

/// Cooperative update: per-agent ratios summed over agents, each critic head
/// regressing its own GAE return, Adam per group actor and for the critic.
#[allow(clippy::too_many_arguments)]
pub fn mappo_update(
    buffer: &mut RolloutBuffer,
    ctx: &UpdateContext,
    actors: &mut [GaussianPolicy<f64>],
    critic: &mut Mlp<f64>,
    actor_opts: &mut [AdamState<f64>],
    critic_opt: &mut AdamState<f64>,
    cfg: &UpdateConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    run_update(buffer, ctx, actors, critic, actor_opts, critic_opt, cfg, rng, false)
}

/// Single-agent PPO update for the baseline: one ratio over the whole action
/// vector and a one-head critic.
#[allow(clippy::too_many_arguments)]
pub fn single_agent_update(
    buffer: &mut RolloutBuffer,
    ctx: &UpdateContext,
    actors: &mut [GaussianPolicy<f64>],
    critic: &mut Mlp<f64>,
    actor_opts: &mut [AdamState<f64>],
    critic_opt: &mut AdamState<f64>,
    cfg: &UpdateConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    if ctx.n_agents() != 1 || ctx.roster.groups.len() != 1 {
        return Err(WalkerError::contract(
            "single-agent update requires a one-agent roster".to_string(),
        ));
    }
    run_update(buffer, ctx, actors, critic, actor_opts, critic_opt, cfg, rng, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::MorphologyConfig;
    use crate::ppo::roster::{ActorMode, TrainMode};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_advantages_leave_only_the_entropy_gradient() {
        let morph = MorphologyConfig::planar_walker();
        let roster = AgentRoster::mash(TrainMode::Bipedal, ActorMode::GroupConcat, &morph).unwrap();
        let ctx = UpdateContext::new(roster, morph.clone());
        let group = &ctx.roster.groups[0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut actor =
            GaussianPolicy::new(group.input_width(&morph), &[12], group.action_dim(&morph));
        actor.init_weights(&mut rng);
        let critic_in = 4 * morph.dof_total() + 26;
        let critic = Mlp::new(critic_in, &[8], 2);

        let member_w = group.member_obs_width(&morph, 0);
        let mut buffer = RolloutBuffer::new(1, 3, 2, 1, 2);
        for s in 0..3 {
            for m in 0..2 {
                buffer.member_obs[m][s] =
                    (0..member_w).map(|_| rng.random_range(-1.0..1.0)).collect();
            }
            buffer.critic_obs[s] = (0..critic_in).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut input = buffer.member_obs[0][s].clone();
            input.extend_from_slice(&buffer.member_obs[1][s]);
            let head = actor.head(&input).unwrap();
            let (action, _) = head.sample(&mut rng);
            for (a, slice) in [(0usize, 0..3), (1usize, 3..6)] {
                buffer.behavior_log_probs[a][s] =
                    head.log_prob_slice(&action, slice.start, slice.len());
            }
            buffer.group_actions[0][s] = action;
            // Advantages stay zero; returns zero as well.
        }
        let cfg = UpdateConfig::default();
        let acc = batch_gradients(&buffer, &ctx, &[actor], &critic, &cfg, &[0, 1, 2], false)
            .unwrap();
        // No surrogate gradient reaches the mean path.
        for layer in &acc.actor_grads[0].net.layers {
            assert!(layer.d_weights.iter().all(|g| *g == 0.0));
            assert!(layer.d_biases.iter().all(|g| *g == 0.0));
        }
        // The entropy bonus still moves sigma: -entropy_coef per dim per sample.
        for g in &acc.actor_grads[0].d_log_std {
            assert!((g - (-cfg.entropy_coef * 3.0)).abs() < 1e-15, "log_std grad {g}");
        }
    }

    #[test]
    fn ratio_one_passes_advantage_through() {
        assert_eq!(clipped_surrogate(1.0, 2.5, 0.2), 2.5);
        assert_eq!(clipped_surrogate(1.0, -1.5, 0.2), -1.5);
    }

    #[test]
    fn clip_activates_above_the_band() {
        assert_eq!(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
    }

    #[test]
    fn negative_advantage_takes_the_smaller_branch() {
        // min(0.5 * -1, 0.8 * -1) = -0.8.
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
    }

    #[test]
    fn infinite_eps_disables_the_clip() {
        for (r, a) in [(0.01, 2.0), (7.5, -3.0), (1.3, 0.4)] {
            assert_eq!(clipped_surrogate(r, a, f64::INFINITY), r * a);
        }
    }
}
