//! Rollout collection across parallel environments and the full
//! centralized-training loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domrand::{
    sample_init_randomization, sample_step_randomization, RandomizationTable,
};
use crate::env::contact::GroundParams;
use crate::env::morphology::MorphologyConfig;
use crate::env::sim::{SimConfig, WalkerSim};
use crate::env::state::CommandVector;
use crate::error::{Result, WalkerError};
use crate::math::{AdamConfig, AdamState, Mlp};
use crate::obs::{
    build_agent_obs, build_critic_obs, sample_commands, CommandRanges, CriticLayout, ObsNoise,
};
use crate::ppo::buffer::RolloutBuffer;
use crate::ppo::policy::GaussianPolicy;
use crate::ppo::roster::{ActorMode, AgentRoster, Algorithm, TrainMode};
use crate::ppo::update::{mappo_update, single_agent_update, UpdateConfig, UpdateContext, UpdateStats};
use crate::rewards::{
    compute_reward_terms, reference_joint_positions, ReferenceSignals, RewardConfig, RewardParams,
};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// One iteration collects one episode-length window across all envs.
    pub iterations: usize,
    pub n_envs: usize,
    pub episode_len: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_mode: ActorMode,
    pub strict_shared_advantage: bool,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            learning_rate: 3e-4,
            epochs: 5,
            minibatches: 4,
            entropy_coef: 0.005,
            value_coef: 1.0,
            max_grad_norm: 1.0,
            iterations: 3000,
            n_envs: 256,
            episode_len: 48,
            actor_hidden: vec![256, 256, 256],
            critic_hidden: vec![512, 512, 512],
            actor_mode: ActorMode::GroupConcat,
            strict_shared_advantage: false,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-5,
        }
    }
}

impl TrainerConfig {
    pub fn update_config(&self) -> UpdateConfig {
        UpdateConfig {
            gamma: self.gamma,
            gae_lambda: self.gae_lambda,
            clip_eps: self.clip_eps,
            entropy_coef: self.entropy_coef,
            value_coef: self.value_coef,
            max_grad_norm: self.max_grad_norm,
            epochs: self.epochs,
            minibatches: self.minibatches,
            strict_shared_advantage: self.strict_shared_advantage,
        }
    }

    pub fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

/// One environment instance with its private rng stream and episode state.
struct EnvSlot {
    sim: WalkerSim,
    rng: ChaCha8Rng,
    commands: CommandVector,
    prev_action: Vec<f64>,
    episode_return: f64,
    episode_start_x: f64,
}

/// Everything produced by one environment over one collection window.
struct EnvTrajectory {
    member_obs: Vec<Vec<Vec<f64>>>,
    critic_obs: Vec<Vec<f64>>,
    group_actions: Vec<Vec<Vec<f64>>>,
    behavior_log_probs: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    bootstrap: Vec<f64>,
    episode_returns: Vec<f64>,
    displacement: f64,
}

/// Per-iteration log row.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_reward: f64,
    pub update: UpdateStats,
    pub wall_clock_s: f64,
}

pub struct Trainer {
    pub morph: MorphologyConfig,
    pub ctx: UpdateContext,
    pub actors: Vec<GaussianPolicy<f64>>,
    pub critic: Mlp<f64>,
    pub algorithm: Algorithm,
    actor_opts: Vec<AdamState<f64>>,
    critic_opt: AdamState<f64>,
    envs: Vec<EnvSlot>,
    pub cfg: TrainerConfig,
    reward_cfg: RewardConfig,
    rand_table: RandomizationTable,
    cmd_ranges: CommandRanges,
    obs_noise: ObsNoise,
    shuffle_rng: ChaCha8Rng,
    iteration: usize,
    /// Zeroes the wall-clock column for byte-stable logs.
    pub deterministic: bool,
}

impl Trainer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        morph: MorphologyConfig,
        algorithm: Algorithm,
        mode: TrainMode,
        cfg: TrainerConfig,
        reward_params: RewardParams,
        rand_table: RandomizationTable,
        cmd_ranges: CommandRanges,
        obs_noise: ObsNoise,
        ground: GroundParams,
        seed: u64,
    ) -> Result<Self> {
        morph.validate()?;
        rand_table.validate()?;
        let roster = AgentRoster::build(algorithm, mode, cfg.actor_mode, &morph)?;
        let sim_cfg = SimConfig::default();
        let reward_cfg = RewardConfig::new(reward_params, &morph, sim_cfg.control_dt);

        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actors = Vec::new();
        for group in &roster.groups {
            let mut policy = GaussianPolicy::new(
                group.input_width(&morph),
                &cfg.actor_hidden,
                group.output_dim(&morph),
            );
            policy.init_weights(&mut init_rng);
            actors.push(policy);
        }
        let critic_in = CriticLayout { dof_total: morph.dof_total() }.width();
        let mut critic = Mlp::new(critic_in, &cfg.critic_hidden, roster.n_agents());
        critic.init_orthogonal(&mut init_rng, std::f64::consts::SQRT_2, 1.0);

        let actor_opts = actors
            .iter()
            .map(|a| AdamState::new(cfg.adam_config(), &a.tensor_lens()))
            .collect();
        let critic_lens: Vec<usize> =
            critic.tensor_shapes().iter().map(|s| s.iter().product()).collect();
        let critic_opt = AdamState::new(cfg.adam_config(), &critic_lens);

        let mut envs = Vec::with_capacity(cfg.n_envs);
        for e in 0..cfg.n_envs {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(e as u64 + 1);
            let mut sim = WalkerSim::new(morph.clone(), sim_cfg)?;
            sim.set_ground(ground);
            let overrides = sample_init_randomization(&rand_table, &mut rng);
            sim.reset(overrides, &mut rng)?;
            let commands = sample_commands(&mut rng, &cmd_ranges);
            let start_x = sim.state().x;
            envs.push(EnvSlot {
                sim,
                rng,
                commands,
                prev_action: vec![0.0; morph.dof_total()],
                episode_return: 0.0,
                episode_start_x: start_x,
            });
        }

        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
        shuffle_rng.set_stream(u64::MAX);

        Ok(Self {
            ctx: UpdateContext::new(roster, morph.clone()),
            morph,
            actors,
            critic,
            algorithm,
            actor_opts,
            critic_opt,
            envs,
            cfg,
            reward_cfg,
            rand_table,
            cmd_ranges,
            obs_noise,
            shuffle_rng,
            iteration: 0,
            deterministic: false,
        })
    }

    /// Builds a trainer straight from a run configuration.
    pub fn from_config(config: &crate::config::RunConfig) -> Result<Self> {
        config.validate()?;
        Self::new(
            config.morphology_config()?,
            config.algorithm,
            config.mode,
            config.trainer.clone(),
            config.rewards,
            config.randomization.clone(),
            config.commands,
            ObsNoise { std: config.observation_noise_std },
            config.ground,
            config.seed,
        )
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn roster(&self) -> &AgentRoster {
        &self.ctx.roster
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward_cfg
    }

    /// Layout fingerprints recorded in checkpoint manifests.
    pub fn layout_summary(&self) -> crate::checkpoint::LayoutSummary {
        crate::checkpoint::LayoutSummary {
            dof_total: self.morph.dof_total(),
            n_agents: self.ctx.roster.n_agents(),
            group_names: self.ctx.roster.groups.iter().map(|g| g.name.clone()).collect(),
            group_input_widths: self
                .ctx
                .roster
                .groups
                .iter()
                .map(|g| g.input_width(&self.morph))
                .collect(),
            group_action_dims: self
                .ctx
                .roster
                .groups
                .iter()
                .map(|g| g.action_dim(&self.morph))
                .collect(),
            critic_input_width: self.critic.in_dim(),
        }
    }

    /// Every parameter and optimizer-moment tensor, named and shaped.
    pub fn checkpoint_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
        for (g, actor) in self.actors.iter().enumerate() {
            let prefix = format!("actor_{}", self.ctx.roster.groups[g].name);
            let shapes = actor.net.tensor_shapes();
            for ((name, data), shape) in actor.net.tensors(&prefix).into_iter().zip(shapes) {
                out.push((name, shape, data));
            }
            out.push((
                format!("{prefix}.log_std"),
                vec![actor.log_std.len()],
                actor.log_std.as_slice(),
            ));
            for (name, data) in self.actor_opts[g].moment_tensors(&format!("{prefix}.adam")) {
                out.push((name, vec![data.len()], data));
            }
        }
        let shapes = self.critic.tensor_shapes();
        for ((name, data), shape) in self.critic.tensors("critic").into_iter().zip(shapes) {
            out.push((name, shape, data));
        }
        for (name, data) in self.critic_opt.moment_tensors("critic.adam") {
            out.push((name, vec![data.len()], data));
        }
        out
    }

    /// Restores parameters (not optimizer moments) from a loaded tensor map.
    pub fn restore_tensors(
        &mut self,
        tensors: &std::collections::HashMap<String, Vec<f64>>,
    ) -> Result<()> {
        let group_names: Vec<String> =
            self.ctx.roster.groups.iter().map(|g| g.name.clone()).collect();
        for (g, actor) in self.actors.iter_mut().enumerate() {
            let prefix = format!("actor_{}", group_names[g]);
            for (name, slot) in actor.tensors_mut(&prefix) {
                let data = tensors.get(&name).ok_or_else(|| {
                    WalkerError::CheckpointMismatch(format!("missing tensor {name}"))
                })?;
                if data.len() != slot.len() {
                    return Err(WalkerError::CheckpointMismatch(format!(
                        "tensor {name} has {} elements, expected {}",
                        data.len(),
                        slot.len()
                    )));
                }
                slot.copy_from_slice(data);
            }
        }
        for (name, slot) in self.critic.tensors_mut("critic") {
            let data = tensors.get(&name).ok_or_else(|| {
                WalkerError::CheckpointMismatch(format!("missing tensor {name}"))
            })?;
            if data.len() != slot.len() {
                return Err(WalkerError::CheckpointMismatch(format!(
                    "tensor {name} has {} elements, expected {}",
                    data.len(),
                    slot.len()
                )));
            }
            slot.copy_from_slice(data);
        }
        Ok(())
    }

    /// Serialized optimizer-shuffle rng for the checkpoint manifest.
    pub fn rng_state_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.shuffle_rng).unwrap_or(serde_json::Value::Null)
    }

    /// Collects one `episode_len` window across every environment. Episodes
    /// that terminate early (falls) reset mid-window with fresh
    /// randomization and commands; the window tail bootstraps.
    pub fn collect(&mut self) -> Result<RolloutBuffer> {
        let t_len = self.cfg.episode_len;
        let n_envs = self.cfg.n_envs;
        let roster = &self.ctx.roster;
        let members = roster.all_members();
        let n_groups = roster.groups.len();
        let n_agents = roster.n_agents();
        let mut buffer = RolloutBuffer::new(n_envs, t_len, members.len(), n_groups, n_agents);

        let actors = &self.actors;
        let critic = &self.critic;
        let ctx = &self.ctx;
        let morph = &self.morph;
        let reward_cfg = &self.reward_cfg;
        let rand_table = &self.rand_table;
        let cmd_ranges = &self.cmd_ranges;
        let obs_noise = self.obs_noise;
        let tau_max = morph.torque_limits();

        let trajectories: Vec<Result<EnvTrajectory>> = self
            .envs
            .par_iter_mut()
            .map(|slot| {
                collect_env_window(
                    slot, t_len, ctx, actors, critic, morph, reward_cfg, rand_table, cmd_ranges,
                    obs_noise, &tau_max, &members,
                )
            })
            .collect();

        for (e, traj) in trajectories.into_iter().enumerate() {
            let traj = traj?;
            for t in 0..t_len {
                let s = buffer.sample_index(e, t);
                for m in 0..members.len() {
                    buffer.member_obs[m][s] = traj.member_obs[m][t].clone();
                }
                buffer.critic_obs[s] = traj.critic_obs[t].clone();
                for g in 0..n_groups {
                    buffer.group_actions[g][s] = traj.group_actions[g][t].clone();
                }
                for a in 0..n_agents {
                    buffer.behavior_log_probs[a][s] = traj.behavior_log_probs[a][t];
                    buffer.values[a][s] = traj.values[a][t];
                }
                buffer.rewards[s] = traj.rewards[t];
                buffer.dones[s] = traj.dones[t];
            }
            for a in 0..n_agents {
                buffer.bootstrap_values[a][e] = traj.bootstrap[a];
            }
            buffer.episode_returns.extend_from_slice(&traj.episode_returns);
            buffer.window_displacement[e] = traj.displacement;
        }
        Ok(buffer)
    }

    /// One optimizer pass over a collected buffer.
    pub fn update(&mut self, buffer: &mut RolloutBuffer) -> Result<UpdateStats> {
        let cfg = self.cfg.update_config();
        match self.algorithm {
            Algorithm::Mash => mappo_update(
                buffer,
                &self.ctx,
                &mut self.actors,
                &mut self.critic,
                &mut self.actor_opts,
                &mut self.critic_opt,
                &cfg,
                &mut self.shuffle_rng,
            ),
            Algorithm::SingleAgentPpo => single_agent_update(
                buffer,
                &self.ctx,
                &mut self.actors,
                &mut self.critic,
                &mut self.actor_opts,
                &mut self.critic_opt,
                &cfg,
                &mut self.shuffle_rng,
            ),
        }
    }

    /// Collect, update, and report one iteration.
    pub fn iterate(&mut self) -> Result<IterationStats> {
        let start = std::time::Instant::now();
        let mut buffer = self.collect()?;
        let mean_reward = buffer.mean_window_return();
        let update = self.update(&mut buffer)?;
        self.iteration += 1;
        let wall_clock_s = if self.deterministic {
            0.0
        } else {
            start.elapsed().as_secs_f64()
        };
        Ok(IterationStats {
            iteration: self.iteration,
            mean_reward,
            update,
            wall_clock_s,
        })
    }
}

/// Steps one environment through a collection window.
#[allow(clippy::too_many_arguments)]
fn collect_env_window(
    slot: &mut EnvSlot,
    t_len: usize,
    ctx: &UpdateContext,
    actors: &[GaussianPolicy<f64>],
    critic: &Mlp<f64>,
    morph: &MorphologyConfig,
    reward_cfg: &RewardConfig,
    rand_table: &RandomizationTable,
    cmd_ranges: &CommandRanges,
    obs_noise: ObsNoise,
    tau_max: &[f64],
    members: &[crate::obs::AgentId],
) -> Result<EnvTrajectory> {
    let roster = &ctx.roster;
    let n_groups = roster.groups.len();
    let n_agents = roster.n_agents();
    let dof = morph.dof_total();
    let mut traj = EnvTrajectory {
        member_obs: vec![Vec::with_capacity(t_len); members.len()],
        critic_obs: Vec::with_capacity(t_len),
        group_actions: vec![Vec::with_capacity(t_len); n_groups],
        behavior_log_probs: vec![Vec::with_capacity(t_len); n_agents],
        values: vec![Vec::with_capacity(t_len); n_agents],
        rewards: Vec::with_capacity(t_len),
        dones: Vec::with_capacity(t_len),
        bootstrap: vec![0.0; n_agents],
        episode_returns: Vec::new(),
        displacement: 0.0,
    };
    let start_x = slot.sim.state().x;

    for _t in 0..t_len {
        let obs_time = slot.sim.time();
        let pre = slot.sim.observe(slot.commands);

        // Per-member actor observations.
        let mut member_obs = Vec::with_capacity(members.len());
        for agent in members {
            member_obs.push(build_agent_obs(
                &pre,
                *agent,
                morph,
                &slot.prev_action,
                obs_time,
                obs_noise,
                &mut slot.rng,
            )?);
        }
        let critic_obs = build_critic_obs(
            &pre,
            slot.sim.overrides(),
            morph,
            &slot.prev_action,
            obs_time,
            slot.sim.total_mass(),
        )?;

        // Sample group actions and per-agent behavior log-probs.
        let mut env_action = vec![0.0; dof];
        let mut group_actions: Vec<Vec<f64>> = Vec::with_capacity(n_groups);
        for (g, group) in roster.groups.iter().enumerate() {
            let slices = &ctx.group_slices[g];
            let agents = &ctx.group_agent_idx[g];
            let action = if group.per_limb {
                let mut action = Vec::with_capacity(group.action_dim(morph));
                for (m, &row) in ctx.group_member_idx[g].iter().enumerate() {
                    let head = actors[g].head(&member_obs[row])?;
                    let (a, lp) = head.sample(&mut slot.rng);
                    traj.behavior_log_probs[agents[m]].push(lp);
                    action.extend_from_slice(&a);
                }
                action
            } else {
                let mut input = Vec::new();
                for &row in &ctx.group_member_idx[g] {
                    input.extend_from_slice(&member_obs[row]);
                }
                let head = actors[g].head(&input)?;
                let (action, _) = head.sample(&mut slot.rng);
                for (&agent, slice) in agents.iter().zip(slices) {
                    let lp = head.log_prob_slice(&action, slice.start, slice.len());
                    traj.behavior_log_probs[agent].push(lp);
                }
                action
            };
            for (k, &j) in group.joint_indices(morph).iter().enumerate() {
                env_action[j] = action[k];
            }
            group_actions.push(action);
        }

        // Critic values per head.
        let values = critic.forward(&critic_obs)?;
        for a in 0..n_agents {
            traj.values[a].push(values[a]);
        }

        let pert = sample_step_randomization(
            rand_table,
            &mut slot.rng,
            slot.sim.config().control_dt,
            tau_max,
        );
        let snap = slot.sim.step(&env_action, slot.commands, &pert)?;

        let refs = ReferenceSignals {
            q_ref: reference_joint_positions(snap.time, &snap.commands, morph),
            stance: crate::obs::stance_mask(
                snap.time,
                morph.gait_rate,
                &morph.leg_phases(),
                snap.commands.standing,
            ),
        };
        let reward = compute_reward_terms(&snap, &refs, reward_cfg, morph)?.total;
        let done = slot.sim.is_fallen();

        for (m, obs) in member_obs.into_iter().enumerate() {
            traj.member_obs[m].push(obs);
        }
        traj.critic_obs.push(critic_obs);
        for (g, a) in group_actions.into_iter().enumerate() {
            traj.group_actions[g].push(a);
        }
        traj.rewards.push(reward);
        traj.dones.push(done);
        slot.prev_action = env_action;
        slot.episode_return += reward;

        if done {
            traj.episode_returns.push(slot.episode_return);
            slot.episode_return = 0.0;
            let overrides = sample_init_randomization(rand_table, &mut slot.rng);
            slot.sim.reset(overrides, &mut slot.rng)?;
            slot.commands = sample_commands(&mut slot.rng, cmd_ranges);
            slot.prev_action = vec![0.0; dof];
            slot.episode_start_x = slot.sim.state().x;
        }
    }
    traj.displacement = slot.sim.state().x - start_x;

    // Bootstrap values for the truncated tail.
    let pre = slot.sim.observe(slot.commands);
    let critic_obs = build_critic_obs(
        &pre,
        slot.sim.overrides(),
        morph,
        &slot.prev_action,
        slot.sim.time(),
        slot.sim.total_mass(),
    )?;
    let values = critic.forward(&critic_obs)?;
    if values.len() != n_agents {
        return Err(WalkerError::contract(format!(
            "critic output width {} does not match agent count {n_agents}",
            values.len()
        )));
    }
    traj.bootstrap.copy_from_slice(&values[..n_agents]);
    Ok(traj)
}
