//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Criteria 9-11 drive the `walker` binary end to end; the rest exercise the
//! library against independent oracles coded in this file.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use walker_core::domrand::{
    sample_init_randomization, sample_step_randomization, PhysicsOverrides, RandomizationTable,
    UniformRange,
};
use walker_core::env::{CommandVector, MorphologyConfig, SimConfig, StepSnapshot, WalkerSim};
use walker_core::math::{AdamState, Mlp};
use walker_core::metrics::{
    action_smoothness, convergence_time, limb_coordination, torso_stability, RewardCurve,
    StabilityWeights,
};
use walker_core::obs::{
    build_agent_obs, build_critic_obs, build_group_input, stance_mask, temporal_director, AgentId,
    CommandRanges, ObsNoise,
};
use walker_core::ppo::{
    batch_gradients, clipped_surrogate, evaluate, mappo_update, single_agent_update, AgentRoster,
    Algorithm, EvalPolicy, GaussianPolicy, RolloutBuffer, Trainer, TrainerConfig, TrainMode,
    UpdateConfig, UpdateContext,
};
use walker_core::rewards::{
    compute_reward_terms, reference_joint_positions, ReferenceSignals, RewardConfig, RewardTerm,
};

fn pass(criterion: u32, what: &str) {
    println!("[criterion {criterion:2}] PASS: {what}");
}

fn walker_bin() -> &'static str {
    env!("CARGO_BIN_EXE_walker")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("walker_acceptance_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_walker(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(walker_bin())
        .args(args)
        .current_dir(cwd)
        .env("WALKER_THREADS", "2")
        .output()
        .expect("walker binary runs")
}

// ---------------------------------------------------------------------------
// Criterion 1: dimension contracts under the paper-dims preset.
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_dimension_contracts() {
    let start = Instant::now();
    let morph = MorphologyConfig::paper_dims();
    let dof = morph.dof_total();
    assert_eq!(dof, 20);

    let snap = fixed_snapshot(&morph, &mut ChaCha8Rng::seed_from_u64(0));
    let prev = vec![0.0; dof];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let leg = build_agent_obs(
        &snap, AgentId::LEG_LEFT, &morph, &prev, 0.0, ObsNoise::default(), &mut rng,
    )
    .unwrap();
    assert_eq!(leg.len(), 32, "per-leg-agent observation");
    let arm = build_agent_obs(
        &snap, AgentId::ARM_LEFT, &morph, &prev, 0.0, ObsNoise::default(), &mut rng,
    )
    .unwrap();
    assert_eq!(arm.len(), 26, "per-arm-agent observation");
    assert_eq!(build_group_input(&leg, &leg).unwrap().len(), 64, "leg group input");
    assert_eq!(build_group_input(&arm, &arm).unwrap().len(), 52, "arm group input");
    let critic = build_critic_obs(&snap, &PhysicsOverrides::nominal(), &morph, &prev, 0.0, 26.0)
        .unwrap();
    assert_eq!(critic.len(), 106, "critic input");

    let roster = AgentRoster::mash(
        TrainMode::ArmSwing,
        walker_core::ppo::ActorMode::GroupConcat,
        &morph,
    )
    .unwrap();
    assert_eq!(roster.groups[0].action_dim(&morph), 12, "leg-group action");
    assert_eq!(roster.groups[1].action_dim(&morph), 8, "arm-group action");
    assert_eq!(roster.n_agents(), 4, "critic output heads");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "runtime {elapsed:?}");
    pass(1, "paper-dims dimensions 32/26/64/52/106, actions 12/8, 4 critic heads");
}

// ---------------------------------------------------------------------------
// Criterion 2: the reward-formula suite against an independent oracle.
// ---------------------------------------------------------------------------

/// Snapshot with randomized but plausible physical ranges.
fn fixed_snapshot(morph: &MorphologyConfig, rng: &mut ChaCha8Rng) -> StepSnapshot {
    let dof = morph.dof_total();
    let vec_in = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dof).map(|_| rng.random_range(lo..hi)).collect()
    };
    let torques: Vec<f64> = morph
        .torque_limits()
        .iter()
        .map(|m| rng.random_range(-*m..*m))
        .collect();
    StepSnapshot {
        time: rng.random_range(0.0..20.0),
        q: vec_in(-1.0, 1.0, rng),
        qd: vec_in(-6.0, 6.0, rng),
        prev_qd: vec_in(-6.0, 6.0, rng),
        prev_torques: torques.iter().map(|t| t * rng.random_range(0.0..1.0)).collect(),
        torques,
        action: vec_in(-1.0, 1.0, rng),
        prev_action: vec_in(-1.0, 1.0, rng),
        prev_prev_action: vec_in(-1.0, 1.0, rng),
        q_target: vec_in(-1.0, 1.0, rng),
        torso_x: rng.random_range(-3.0..3.0),
        torso_z: rng.random_range(0.2..1.4),
        pitch: rng.random_range(-0.9..0.9),
        torso_vx: rng.random_range(-2.0..2.0),
        torso_vz: rng.random_range(-1.0..1.0),
        pitch_rate: rng.random_range(-4.0..4.0),
        gravity_projection: rng.random_range(0.0..0.8),
        foot_heights: [rng.random_range(-0.02..0.25), rng.random_range(-0.02..0.25)],
        foot_velocities: [
            (rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0)),
            (rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0)),
        ],
        foot_contacts: [rng.random(), rng.random()],
        foot_air_times: [rng.random_range(0.0..0.6), rng.random_range(0.0..0.6)],
        touchdowns: if rng.random::<f64>() < 0.5 {
            vec![walker_core::env::TouchdownEvent {
                foot: rng.random_range(0..2),
                air_time: rng.random_range(0.0..0.6),
                dx: rng.random_range(0.0..0.5),
            }]
        } else {
            Vec::new()
        },
        collision_forces: (0..5).map(|_| rng.random_range(0.0..2.0)).collect(),
        commands: if rng.random::<f64>() < 0.3 {
            CommandVector::standing()
        } else {
            CommandVector::forward(rng.random_range(0.2..1.0))
        },
        push_force: (0.0, 0.0),
    }
}

/// Naive per-term evaluation, written directly from the reward table.
fn naive_reward_terms(
    snap: &StepSnapshot,
    refs: &ReferenceSignals,
    cfg: &RewardConfig,
    morph: &MorphologyConfig,
) -> [f64; 16] {
    let p = &cfg.params;
    let defaults = morph.q_default();
    let dt = cfg.control_dt;
    let mut u = [0.0_f64; 16];

    let mut norm_sq = 0.0;
    for i in 0..snap.q.len() {
        norm_sq += (snap.q[i] - defaults[i] - refs.q_ref[i]).powi(2);
    }
    u[0] = (-norm_sq.sqrt()).exp();

    let (cvx, cvy) = if snap.commands.standing { (0.0, 0.0) } else { (snap.commands.vx, snap.commands.vy) };
    u[1] = (-((cvx - snap.torso_vx).powi(2) + cvy.powi(2)) / p.sigma_tracking).exp();
    u[2] = (-(snap.commands.yaw_rate - 0.0).powi(2) / p.sigma_yaw).exp();

    for i in 0..snap.torques.len() {
        u[3] += (snap.torques[i] / cfg.tau_max[i]).powi(2);
        u[4] += snap.qd[i].powi(2);
        u[5] += ((snap.qd[i] - snap.prev_qd[i]) / dt).powi(2);
        u[13] += (snap.action[i] - snap.prev_action[i]).powi(2);
        u[14] += (snap.action[i] - 2.0 * snap.prev_action[i] + snap.prev_prev_action[i]).powi(2);
        u[15] += ((snap.torques[i] - snap.prev_torques[i]) / (cfg.tau_max[i] * dt)).powi(2);
    }

    for td in &snap.touchdowns {
        u[6] += td.air_time * (-p.air_time_decay * td.dx.abs()).exp();
    }
    for z in snap.foot_heights {
        if (z - p.target_foot_height).abs() < p.clearance_tol {
            u[7] += 1.0;
        }
    }
    for f in 0..2 {
        u[8] += if snap.foot_contacts[f] == refs.stance[f] { 1.0 } else { -0.3 };
    }
    u[9] = if p.orientation_literal_sign {
        snap.pitch.abs().exp() + snap.gravity_projection.exp()
    } else {
        (-snap.pitch.abs()).exp() + (-snap.gravity_projection).exp()
    };
    for f in &snap.collision_forces {
        if *f > 0.1 {
            u[10] += 1.0;
        }
    }
    for f in 0..2 {
        if snap.foot_contacts[f] {
            let (vx, vz) = snap.foot_velocities[f];
            u[11] += vx * vx + vz * vz;
        }
    }
    u[12] = (-(snap.torso_z - cfg.target_base_height).abs()).exp();
    u
}

#[test]
fn criterion_02_reward_formula_suite() {
    let start = Instant::now();
    let morph = MorphologyConfig::planar_walker();
    let cfg = RewardConfig::for_morphology(&morph, 1.0 / 60.0);
    let scales = [
        3.5, 1.5, 1.4, -2.0e-3, -5.0e-4, -1.0e-7, 2.0, 2.0, 1.2, 1.0, -1.0, -5.0e-2, 0.2, -0.1,
        -0.1, -2.0e-4,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for case in 0..100 {
        let snap = fixed_snapshot(&morph, &mut rng);
        let refs = ReferenceSignals {
            q_ref: reference_joint_positions(snap.time, &snap.commands, &morph),
            stance: stance_mask(
                snap.time,
                morph.gait_rate,
                &morph.leg_phases(),
                snap.commands.standing,
            ),
        };
        let got = compute_reward_terms(&snap, &refs, &cfg, &morph).unwrap();
        let want = naive_reward_terms(&snap, &refs, &cfg, &morph);
        let mut total = 0.0;
        for (i, term) in RewardTerm::ALL.iter().enumerate() {
            let (unscaled, scaled) = got.get(*term);
            assert!(
                (unscaled - want[i]).abs() < 1e-9,
                "case {case} term {}: {unscaled} vs oracle {}",
                term.name(),
                want[i]
            );
            assert!(
                (scaled - scales[i] * want[i]).abs() < 1e-9,
                "case {case} term {} scale",
                term.name()
            );
            total += scales[i] * want[i];
        }
        assert!((got.total - total).abs() < 1e-9, "case {case} total");
    }
    // The piecewise contact-number values, pinned explicitly.
    let mut snap = fixed_snapshot(&morph, &mut ChaCha8Rng::seed_from_u64(1));
    snap.foot_contacts = [true, false];
    let refs = ReferenceSignals { q_ref: vec![0.0; 10], stance: [true, false] };
    let b = compute_reward_terms(&snap, &refs, &cfg, &morph).unwrap();
    assert_eq!(b.get(RewardTerm::FeetContactNumber).0, 2.0);
    let refs = ReferenceSignals { q_ref: vec![0.0; 10], stance: [true, true] };
    let b = compute_reward_terms(&snap, &refs, &cfg, &morph).unwrap();
    assert!((b.get(RewardTerm::FeetContactNumber).0 - 0.7).abs() < 1e-12);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "runtime {elapsed:?}");
    pass(2, "all 16 reward terms match the independent oracle on 100 snapshots to 1e-9");
}

// ---------------------------------------------------------------------------
// Criterion 3: loss gradients against central finite differences.
// ---------------------------------------------------------------------------

fn gradient_fixture(
    seed: u64,
) -> (UpdateContext, RolloutBuffer, Vec<GaussianPolicy<f64>>, Mlp<f64>, UpdateConfig) {
    let morph = MorphologyConfig::planar_walker();
    let roster = AgentRoster::mash(
        TrainMode::Bipedal,
        walker_core::ppo::ActorMode::GroupConcat,
        &morph,
    )
    .unwrap();
    let ctx = UpdateContext::new(roster, morph.clone());
    let group = &ctx.roster.groups[0];
    let in_dim = group.input_width(&morph);
    let act_dim = group.action_dim(&morph);
    let member_w = group.member_obs_width(&morph, 0);
    let critic_in = 4 * morph.dof_total() + 26;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actor = GaussianPolicy::new(in_dim, &[24, 16], act_dim);
    actor.init_weights(&mut rng);
    let mut critic = Mlp::new(critic_in, &[32], 2);
    critic.init_orthogonal(&mut rng, std::f64::consts::SQRT_2, 1.0);

    let n = 6;
    let mut buffer = RolloutBuffer::new(1, n, 2, 1, 2);
    for s in 0..n {
        for m in 0..2 {
            buffer.member_obs[m][s] = (0..member_w).map(|_| rng.random_range(-1.0..1.0)).collect();
        }
        buffer.critic_obs[s] = (0..critic_in).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut input = buffer.member_obs[0][s].clone();
        input.extend_from_slice(&buffer.member_obs[1][s]);
        let head = actor.head(&input).unwrap();
        let (action, _) = head.sample(&mut rng);
        for (a, slice) in [(0usize, 0..3), (1usize, 3..6)] {
            let lp = head.log_prob_slice(&action, slice.start, slice.len());
            buffer.behavior_log_probs[a][s] = lp + rng.random_range(-0.05..0.05);
        }
        buffer.group_actions[0][s] = action;
        for a in 0..2 {
            buffer.advantages[a][s] = rng.random_range(-1.0..1.0);
            buffer.returns[a][s] = rng.random_range(-1.0..1.0);
        }
    }
    (ctx, buffer, vec![actor], critic, UpdateConfig::default())
}

#[test]
fn criterion_03_gradient_correctness() {
    let start = Instant::now();
    let (ctx, buffer, mut actors, mut critic, cfg) = gradient_fixture(33);
    let samples: Vec<usize> = (0..buffer.n_samples()).collect();
    let acc = batch_gradients(&buffer, &ctx, &actors, &critic, &cfg, &samples, false).unwrap();
    let h = 1e-5;
    let loss = |actors: &[GaussianPolicy<f64>], critic: &Mlp<f64>| -> f64 {
        let a = batch_gradients(&buffer, &ctx, actors, critic, &cfg, &samples, false).unwrap();
        a.policy_loss + a.value_loss
    };
    let check = |analytic: f64, numeric: f64, what: &str| {
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        let rel = ((analytic - numeric) / denom).abs();
        assert!(rel < 1e-4, "{what}: {analytic} vs {numeric} (rel {rel})");
    };

    for li in 0..actors[0].net.layers.len() {
        for wi in 0..actors[0].net.layers[li].weights.len() {
            let orig = actors[0].net.layers[li].weights[wi];
            actors[0].net.layers[li].weights[wi] = orig + h;
            let plus = loss(&actors, &critic);
            actors[0].net.layers[li].weights[wi] = orig - h;
            let minus = loss(&actors, &critic);
            actors[0].net.layers[li].weights[wi] = orig;
            check(
                acc.actor_grads[0].net.layers[li].d_weights[wi],
                (plus - minus) / (2.0 * h),
                "actor weight",
            );
        }
    }
    for di in 0..actors[0].log_std.len() {
        let orig = actors[0].log_std[di];
        actors[0].log_std[di] = orig + h;
        let plus = loss(&actors, &critic);
        actors[0].log_std[di] = orig - h;
        let minus = loss(&actors, &critic);
        actors[0].log_std[di] = orig;
        check(acc.actor_grads[0].d_log_std[di], (plus - minus) / (2.0 * h), "log_std");
    }
    for li in 0..critic.layers.len() {
        for wi in 0..critic.layers[li].weights.len() {
            let orig = critic.layers[li].weights[wi];
            critic.layers[li].weights[wi] = orig + h;
            let plus = loss(&actors, &critic);
            critic.layers[li].weights[wi] = orig - h;
            let minus = loss(&actors, &critic);
            critic.layers[li].weights[wi] = orig;
            check(
                acc.critic_grads.layers[li].d_weights[wi],
                (plus - minus) / (2.0 * h),
                "critic weight",
            );
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "runtime {elapsed:?}");
    pass(3, "actor and critic loss gradients match finite differences (rel < 1e-4)");
}

// ---------------------------------------------------------------------------
// Criterion 4: GAE recursion against the brute-force double loop.
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_gae_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let n = rng.random_range(1..16);
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.25).collect();
        let bootstrap = rng.random_range(-2.0..2.0);
        let gamma = rng.random_range(0.0..1.0);
        let lambda = rng.random_range(0.0..1.0);
        let (adv, _) =
            walker_core::ppo::compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);

        // Independent double loop with explicit (1 - done) products.
        for t in 0..n {
            let mut acc = 0.0;
            let mut weight = 1.0;
            for k in t..n {
                let next_v = if k + 1 < n { values[k + 1] } else { bootstrap };
                let mask = if dones[k] { 0.0 } else { 1.0 };
                let delta = rewards[k] + gamma * next_v * mask - values[k];
                acc += weight * delta;
                if dones[k] {
                    break;
                }
                weight *= gamma * lambda;
            }
            assert!((adv[t] - acc).abs() < 1e-10, "t={t}: {} vs {acc}", adv[t]);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "runtime {elapsed:?}");
    pass(4, "GAE recursion equals the brute-force double loop on 1000 sequences to 1e-10");
}

// ---------------------------------------------------------------------------
// Criterion 5: PPO identities.
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_ppo_identities() {
    assert_eq!(clipped_surrogate(1.5, 1.0, 0.2), 1.2);

    // Ratios equal one before the first gradient step of every update.
    let cfg = TrainerConfig {
        n_envs: 4,
        episode_len: 12,
        actor_hidden: vec![24],
        critic_hidden: vec![24],
        epochs: 2,
        minibatches: 2,
        ..TrainerConfig::default()
    };
    for algorithm in [Algorithm::Mash, Algorithm::SingleAgentPpo] {
        let mut trainer = Trainer::new(
            MorphologyConfig::planar_walker(),
            algorithm,
            TrainMode::Bipedal,
            cfg.clone(),
            Default::default(),
            RandomizationTable::default(),
            CommandRanges::default(),
            ObsNoise::default(),
            walker_core::env::GroundParams::default(),
            11,
        )
        .unwrap();
        for _ in 0..3 {
            let stats = trainer.iterate().unwrap();
            assert!(
                stats.update.first_pass_ratio_error < 1e-6,
                "{algorithm:?} first-pass ratio deviation {}",
                stats.update.first_pass_ratio_error
            );
        }
    }

    // The one-agent cooperative update reproduces single-agent PPO bitwise.
    let (ctx, buffer, actor, critic) = {
        let morph = MorphologyConfig::planar_walker();
        let roster = AgentRoster::single_agent(TrainMode::Bipedal, &morph).unwrap();
        let ctx = UpdateContext::new(roster, morph.clone());
        let group = &ctx.roster.groups[0];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut actor =
            GaussianPolicy::new(group.input_width(&morph), &[20], group.action_dim(&morph));
        actor.init_weights(&mut rng);
        let critic_in = 4 * morph.dof_total() + 26;
        let mut critic = Mlp::new(critic_in, &[24], 1);
        critic.init_orthogonal(&mut rng, std::f64::consts::SQRT_2, 1.0);
        let member_w = group.member_obs_width(&morph, 0);
        let mut buffer = RolloutBuffer::new(2, 8, 2, 1, 1);
        for s in 0..16 {
            for m in 0..2 {
                buffer.member_obs[m][s] =
                    (0..member_w).map(|_| rng.random_range(-1.0..1.0)).collect();
            }
            buffer.critic_obs[s] = (0..critic_in).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut input = buffer.member_obs[0][s].clone();
            input.extend_from_slice(&buffer.member_obs[1][s]);
            let head = actor.head(&input).unwrap();
            let (action, lp) = head.sample(&mut rng);
            buffer.group_actions[0][s] = action;
            buffer.behavior_log_probs[0][s] = lp;
            buffer.values[0][s] = critic.forward(&buffer.critic_obs[s]).unwrap()[0];
            buffer.rewards[s] = rng.random_range(-1.0..1.0);
        }
        (ctx, buffer, actor, critic)
    };
    let cfg = UpdateConfig { epochs: 2, minibatches: 2, ..UpdateConfig::default() };
    let run = |single: bool| {
        let mut buffer = buffer.clone();
        let mut actors = vec![actor.clone()];
        let mut critic = critic.clone();
        let mut aopt = vec![AdamState::new(Default::default(), &actors[0].tensor_lens())];
        let lens: Vec<usize> =
            critic.tensor_shapes().iter().map(|s| s.iter().product()).collect();
        let mut copt = AdamState::new(Default::default(), &lens);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        if single {
            single_agent_update(&mut buffer, &ctx, &mut actors, &mut critic, &mut aopt, &mut copt, &cfg, &mut rng)
                .unwrap()
        } else {
            mappo_update(&mut buffer, &ctx, &mut actors, &mut critic, &mut aopt, &mut copt, &cfg, &mut rng)
                .unwrap()
        }
    };
    let a = run(false);
    let b = run(true);
    assert_eq!(a.policy_loss.to_bits(), b.policy_loss.to_bits(), "policy loss");
    assert_eq!(a.value_loss.to_bits(), b.value_loss.to_bits(), "value loss");
    assert_eq!(a.entropy.to_bits(), b.entropy.to_bits(), "entropy");

    pass(5, "ratio identity, clipped_surrogate(1.5,1,0.2)=1.2, bitwise N=1 reduction");
}

// ---------------------------------------------------------------------------
// Criterion 6: temporal director and stance masks.
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_temporal_director_and_stance() {
    let k = 1.5;
    for i in 0..2000 {
        let t = i as f64 * 0.0173;
        let a = temporal_director(t, k, 0.2);
        let b = temporal_director(t + 1.0 / k, k, 0.2);
        assert!((a - b).abs() < 1e-9, "periodicity at t={t}");

        let left = temporal_director(t, k, 0.0);
        let right = temporal_director(t, k, 0.5);
        assert_eq!(left, -right, "exact antiphase negation at t={t}");

        let masks = stance_mask(t, k, &[0.0, 0.5], false);
        if left != 0.0 {
            assert_ne!(masks[0], masks[1], "complementary stance at t={t}");
        }
    }
    pass(6, "director periodicity to 1e-9, exact antiphase negation, complementary stance");
}

// ---------------------------------------------------------------------------
// Criterion 7: randomization containment and phase separation.
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_randomization_containment() {
    let table = RandomizationTable::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 100_000;

    let mut draws: Vec<(&str, Vec<f64>, UniformRange)> = table
        .entries()
        .iter()
        .map(|(name, range)| (*name, Vec::with_capacity(n), *range))
        .collect();
    for _ in 0..n {
        let o = sample_init_randomization(&table, &mut rng);
        let p = sample_step_randomization(&table, &mut rng, 1.0 / 60.0, &[60.0]);
        let values = [
            o.friction,
            o.mass_scale,
            o.com_offset,
            table.motor_delay_ms.sample(&mut rng),
            p.push.map(|e| e.force_x).unwrap_or(0.0),
            o.gravity,
            o.joint_damping,
            o.joint_friction,
            o.joint_armature,
            o.kp_scale,
            o.kd_scale,
        ];
        for (slot, v) in draws.iter_mut().zip(values) {
            slot.1.push(v);
        }
    }
    for (name, values, range) in &mut draws {
        for v in values.iter() {
            assert!(range.contains(*v), "{name} draw {v} outside [{}, {}]", range.low, range.high);
        }
        // Push force only registers when an event fires; skip its KS test
        // (the zero placeholder dominates) but keep containment.
        if *name == "push_force" {
            continue;
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        let m = values.len() as f64;
        for (i, v) in values.iter().enumerate() {
            let cdf = if range.high > range.low {
                (v - range.low) / (range.high - range.low)
            } else {
                1.0
            };
            ks = ks.max((cdf - i as f64 / m).abs()).max(((i + 1) as f64 / m - cdf).abs());
        }
        assert!(ks < 0.02, "{name}: KS statistic {ks}");
    }

    // Phase separation: stepping with per-step perturbations never mutates
    // the init-time overrides.
    let morph = MorphologyConfig::planar_walker();
    let mut sim = WalkerSim::new(morph.clone(), SimConfig::default()).unwrap();
    let overrides = sample_init_randomization(&table, &mut rng);
    sim.reset(overrides, &mut rng).unwrap();
    let dof = morph.dof_total();
    for _ in 0..40 {
        let pert = sample_step_randomization(&table, &mut rng, 1.0 / 60.0, &morph.torque_limits());
        sim.step(&vec![0.0; dof], CommandVector::standing(), &pert).unwrap();
        assert_eq!(*sim.overrides(), overrides, "init-time overrides changed during an episode");
    }

    pass(7, "100k draws inside ranges with KS < 0.02; init/step phase separation holds");
}

// ---------------------------------------------------------------------------
// Criterion 8: metric formulas on hand-computed cases.
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_metric_formulas() {
    let actions = vec![vec![0.0], vec![1.0], vec![0.0], vec![1.0]];
    assert_eq!(action_smoothness(&actions).unwrap(), 0.75);

    let phi: Vec<f64> = (0..200).map(|t| walker_core::metrics::wrap_angle(t as f64 * 0.21)).collect();
    let anti: Vec<f64> = phi.iter().map(|p| walker_core::metrics::wrap_angle(p - std::f64::consts::PI)).collect();
    let c = limb_coordination(&phi, &anti, std::f64::consts::PI).unwrap();
    assert!(c < 1e-12, "antiphase coordination {c}");

    let heights = vec![0.97; 50];
    let orient = vec![vec![0.12]; 50];
    assert_eq!(
        torso_stability(&heights, &orient, StabilityWeights::default()).unwrap(),
        0.0
    );

    let mut values = vec![0.0; 500];
    values.extend(vec![1.0; 500]);
    let curve = RewardCurve::new(values);
    let t = convergence_time(&curve).unwrap();
    assert!(
        (t as i64 - 500).unsigned_abs() as usize <= curve.window,
        "step-curve convergence at {t}"
    );

    pass(8, "S_action(0,1,0,1)=0.75, antiphase C_limb=0, constant S_torso=0, step T_Conv within window");
}

// ---------------------------------------------------------------------------
// Criteria 9-11: end-to-end runs through the walker binary.
// ---------------------------------------------------------------------------

/// Desk-scale learning configuration: the planar-walker preset with gentle
/// randomization and small nets sized for CPU throughput.
fn smoke_config(seed: u64, out_dir: &str, iterations: usize, n_envs: usize, algorithm: &str) -> serde_json::Value {
    serde_json::json!({
        "schema_version": 1,
        "mode": "bipedal",
        "algorithm": algorithm,
        "morphology": "planar-walker",
        "trainer": {
            "gamma": 0.99,
            "gae_lambda": 0.95,
            "clip_eps": 0.2,
            "learning_rate": 4e-4,
            "epochs": 3,
            "minibatches": 4,
            "entropy_coef": 0.004,
            "value_coef": 1.0,
            "max_grad_norm": 1.0,
            "iterations": iterations,
            "n_envs": n_envs,
            "episode_len": 48,
            "actor_hidden": [64, 64],
            "critic_hidden": [128, 128],
            "actor_mode": "group-concat",
            "strict_shared_advantage": false,
            "adam_beta1": 0.9,
            "adam_beta2": 0.999,
            "adam_epsilon": 1e-5
        },
        "rewards": walker_core::rewards::RewardParams::default(),
        "randomization": {
            "friction_coefficient": {"low": 0.6, "high": 1.0},
            "link_mass_scale": {"low": 0.95, "high": 1.05},
            "com_offset": {"low": -0.01, "high": 0.01},
            "motor_delay_ms": {"low": 0.0, "high": 0.0},
            "push_force": {"low": 0.0, "high": 0.0},
            "gravity": {"low": 9.81, "high": 9.81},
            "joint_damping": {"low": 0.0, "high": 0.02},
            "joint_friction": {"low": 0.0, "high": 0.02},
            "joint_armature": {"low": 0.008, "high": 0.012},
            "kp_scale": {"low": 1.0, "high": 1.0},
            "kd_scale": {"low": 1.0, "high": 1.0},
            "push_probability": 0.0,
            "push_duration": 0.2,
            "torque_noise_frac": 0.01,
            "delay_stress": false
        },
        "commands": {"standing_probability": 0.0, "vx_low": 0.4, "vx_high": 0.8},
        "observation_noise_std": 0.0,
        "seed": seed,
        "output_dir": out_dir,
        "checkpoint_interval": 0,
        "eval_episodes": 50
    })
}

#[test]
fn criterion_09_learning_smoke() {
    let start = Instant::now();
    let dir = temp_dir("learning");
    let seeds = [0u64, 1, 2];
    let mut displacements = Vec::new();
    let mut curve_ok = 0usize;

    for &seed in &seeds {
        let cfg = smoke_config(seed, &format!("runs/seed{seed}"), 400, 64, "mash");
        let cfg_path = dir.join(format!("seed{seed}.json"));
        std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        let out = run_walker(
            &["train", "--config", cfg_path.to_str().unwrap()],
            &dir,
        );
        assert!(
            out.status.success(),
            "training seed {seed} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let run_dir = dir.join(format!("runs/seed{seed}"));
        let ckpt = run_dir.join("checkpoints/ckpt_final.json");
        let out = run_walker(
            &[
                "eval",
                "--ckpt",
                ckpt.to_str().unwrap(),
                "--episodes",
                "50",
                "--seed",
                &seed.to_string(),
            ],
            &dir,
        );
        assert!(
            out.status.success(),
            "eval seed {seed} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(run_dir.join("eval/metrics.json")).unwrap(),
        )
        .unwrap();
        displacements.push(report["mean_displacement"].as_f64().unwrap());

        // Smoothed curve monotone non-decreasing over >= 80% of 100-iteration
        // windows.
        let log = std::fs::read_to_string(run_dir.join("train_log.csv")).unwrap();
        let rewards: Vec<f64> = log
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(rewards.len(), 400);
        let curve = RewardCurve::new(rewards);
        let smoothed = curve.smoothed();
        let window = 100;
        let total = smoothed.len() - window + 1;
        let good = (0..total)
            .filter(|&i| smoothed[i + window - 1] >= smoothed[i] - 1e-9)
            .count();
        let frac = good as f64 / total as f64;
        assert!(
            frac >= 0.8,
            "seed {seed}: only {frac:.2} of 100-iteration windows are non-decreasing"
        );
        curve_ok += 1;
    }

    // Random-policy displacement under the identical evaluation protocol.
    let morph = MorphologyConfig::planar_walker();
    let reward_cfg = RewardConfig::for_morphology(&morph, 1.0 / 60.0);
    let random = evaluate(
        EvalPolicy::UniformRandom,
        &morph,
        &reward_cfg,
        50,
        crate_eval_episode_len(),
        CommandVector::forward(0.6),
        12345,
    )
    .unwrap();
    let random_disp = random.mean_displacement();
    let trained_disp = displacements.iter().sum::<f64>() / displacements.len() as f64;
    assert!(
        trained_disp > 5.0 * random_disp,
        "trained displacement {trained_disp:.3} m not above 5x random {random_disp:.3} m"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1800.0,
        "learning smoke took {elapsed:?} (budget 30 min)"
    );
    pass(
        9,
        &format!(
            "3 seeds learned: displacement {trained_disp:.3} m vs random {random_disp:.3} m, \
             {curve_ok}/3 curves monotone (elapsed {:.0} s)",
            elapsed.as_secs_f64()
        ),
    );
}

/// Evaluation episode length used by the CLI (mirrored here for the random
/// baseline protocol).
fn crate_eval_episode_len() -> usize {
    240
}

#[test]
fn criterion_10_comparison_harness() {
    let dir = temp_dir("compare");
    let a = smoke_config(0, "unused", 20, 8, "mash");
    let b = smoke_config(0, "unused", 20, 8, "single-agent-ppo");
    let a_path = dir.join("a.json");
    let b_path = dir.join("b.json");
    std::fs::write(&a_path, serde_json::to_string_pretty(&a).unwrap()).unwrap();
    std::fs::write(&b_path, serde_json::to_string_pretty(&b).unwrap()).unwrap();

    let out = run_walker(
        &[
            "compare",
            "--a",
            a_path.to_str().unwrap(),
            "--b",
            b_path.to_str().unwrap(),
            "--seeds",
            "0,1,2",
            "--out",
            dir.join("out").to_str().unwrap(),
        ],
        &dir,
    );
    assert!(
        out.status.success(),
        "compare failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let table = std::fs::read_to_string(dir.join("out/comparison.md")).unwrap();
    for col in ["T_Conv", "S_action", "S_torso", "C_limb"] {
        assert!(table.contains(col), "missing column {col}");
    }
    assert!(table.contains("mash"), "missing method row");
    assert!(table.contains("single-agent-ppo"), "missing baseline row");

    let json: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("out/comparison.json")).unwrap(),
    )
    .unwrap();
    let methods = json.as_array().unwrap();
    assert_eq!(methods.len(), 2);
    for m in methods {
        let reports = m["reports"].as_array().unwrap();
        assert_eq!(reports.len(), 3, "three seeds per method");
        for r in reports {
            for key in ["s_action", "s_torso", "c_limb", "t_conv"] {
                assert!(!r[key].is_null() || key == "t_conv", "metric {key} missing");
            }
            assert!(r["s_action"].as_f64().unwrap().is_finite());
        }
    }
    pass(10, "compare over seeds {0,1,2} emits all four metrics for both methods");
}

#[test]
fn criterion_11_determinism() {
    let dir = temp_dir("determinism");
    let cfg = smoke_config(5, "runs/det", 20, 8, "mash");
    let cfg_path = dir.join("det.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();

    let run_once = || {
        let out = run_walker(
            &["train", "--config", cfg_path.to_str().unwrap(), "--deterministic"],
            &dir,
        );
        assert!(
            out.status.success(),
            "deterministic train failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let run = dir.join("runs/det");
        let log = std::fs::read(run.join("train_log.csv")).unwrap();
        let blob = std::fs::read(run.join("checkpoints/ckpt_final.bin")).unwrap();
        let manifest = std::fs::read(run.join("checkpoints/ckpt_final.json")).unwrap();
        let _ = std::fs::remove_dir_all(&run);
        (log, blob, manifest)
    };

    let (log1, blob1, man1) = run_once();
    let (log2, blob2, man2) = run_once();
    assert_eq!(log1, log2, "train_log.csv differs between identical runs");
    assert_eq!(blob1, blob2, "checkpoint blobs differ");
    assert_eq!(man1, man2, "checkpoint manifests differ");
    pass(11, "two deterministic runs are byte-identical (log, blob, manifest)");
}
