//! Deterministic policy evaluation: mean actions, unrandomized physics,
//! per-step traces for metrics and trajectory dumps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domrand::{PhysicsOverrides, StepPerturbation};
use crate::env::morphology::MorphologyConfig;
use crate::env::sim::{SimConfig, WalkerSim};
use crate::env::state::{CommandVector, StepSnapshot};
use crate::error::Result;
use crate::obs::{build_agent_obs, ObsNoise};
use crate::ppo::policy::GaussianPolicy;
use crate::ppo::update::UpdateContext;
use crate::rewards::{
    compute_reward_terms, reference_joint_positions, ReferenceSignals, RewardBreakdown,
    RewardConfig,
};

/// One evaluated episode.
#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub snapshots: Vec<StepSnapshot>,
    pub rewards: Vec<RewardBreakdown>,
    pub references: Vec<Vec<f64>>,
    pub commands: CommandVector,
    /// Forward displacement of the torso over the episode (m).
    pub displacement: f64,
    pub fell: bool,
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub episodes: Vec<EpisodeTrace>,
}

impl EvalResult {
    pub fn mean_displacement(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().map(|e| e.displacement).sum::<f64>() / self.episodes.len() as f64
    }

    pub fn mean_return(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes
            .iter()
            .map(|e| e.rewards.iter().map(|r| r.total).sum::<f64>())
            .sum::<f64>()
            / self.episodes.len() as f64
    }
}

/// Action source for evaluation rollouts.
pub enum EvalPolicy<'a> {
    /// Mean actions from trained group actors.
    Actors(&'a [GaussianPolicy<f64>], &'a UpdateContext),
    /// Uniform random actions in [-1, 1] per dimension.
    UniformRandom,
}

/// Runs deterministic-policy episodes under nominal physics (no
/// randomization, no observation noise) and returns full traces.
pub fn evaluate(
    policy: EvalPolicy<'_>,
    morph: &MorphologyConfig,
    reward_cfg: &RewardConfig,
    episodes: usize,
    episode_len: usize,
    commands: CommandVector,
    seed: u64,
) -> Result<EvalResult> {
    let sim_cfg = SimConfig::default();
    let mut sim = WalkerSim::new(morph.clone(), sim_cfg)?;
    let dof = morph.dof_total();
    let mut out = Vec::with_capacity(episodes);

    for ep in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ep as u64 + 1);
        sim.reset(PhysicsOverrides::nominal(), &mut rng)?;
        let mut prev_action = vec![0.0; dof];
        let mut trace = EpisodeTrace {
            snapshots: Vec::with_capacity(episode_len),
            rewards: Vec::with_capacity(episode_len),
            references: Vec::with_capacity(episode_len),
            commands,
            displacement: 0.0,
            fell: false,
        };
        let start_x = sim.state().x;

        for _t in 0..episode_len {
            let obs_time = sim.time();
            let pre = sim.observe(commands);
            let mut env_action = vec![0.0; dof];
            match &policy {
                EvalPolicy::Actors(actors, ctx) => {
                    let mut member_obs = Vec::new();
                    for agent in ctx.roster.all_members() {
                        member_obs.push(build_agent_obs(
                            &pre,
                            agent,
                            morph,
                            &prev_action,
                            obs_time,
                            ObsNoise::default(),
                            &mut rng,
                        )?);
                    }
                    for (g, group) in ctx.roster.groups.iter().enumerate() {
                        let action = if group.per_limb {
                            let mut action = Vec::new();
                            for &row in &ctx.group_member_idx[g] {
                                let head = actors[g].head(&member_obs[row])?;
                                action.extend_from_slice(&head.mean);
                            }
                            action
                        } else {
                            let mut input = Vec::new();
                            for &row in &ctx.group_member_idx[g] {
                                input.extend_from_slice(&member_obs[row]);
                            }
                            actors[g].head(&input)?.mean
                        };
                        for (k, &j) in group.joint_indices(morph).iter().enumerate() {
                            env_action[j] = action[k];
                        }
                    }
                }
                EvalPolicy::UniformRandom => {
                    use rand::Rng;
                    for a in env_action.iter_mut() {
                        *a = rng.random_range(-1.0..1.0);
                    }
                }
            }

            let snap = sim.step(&env_action, commands, &StepPerturbation::none(dof))?;
            let refs = ReferenceSignals {
                q_ref: reference_joint_positions(snap.time, &snap.commands, morph),
                stance: crate::obs::stance_mask(
                    snap.time,
                    morph.gait_rate,
                    &morph.leg_phases(),
                    snap.commands.standing,
                ),
            };
            let reward = compute_reward_terms(&snap, &refs, reward_cfg, morph)?;
            trace.references.push(refs.q_ref.clone());
            trace.snapshots.push(snap);
            trace.rewards.push(reward);
            prev_action = env_action;

            if sim.is_fallen() {
                trace.fell = true;
                break;
            }
        }
        trace.displacement = sim.state().x - start_x;
        out.push(trace);
    }
    Ok(EvalResult { episodes: out })
}
