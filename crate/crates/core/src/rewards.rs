//! The reward suite: every term as a pure function of a step snapshot, plus
//! the scaled sum forming the shared team reward.

use serde::{Deserialize, Serialize};

use crate::env::morphology::MorphologyConfig;
use crate::env::state::{CommandVector, StepSnapshot};
use crate::error::{Result, WalkerError};
use crate::obs::temporal_director;

/// Every reward term, in the fixed evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardTerm {
    JointPosition,
    TrackingLinVel,
    TrackingAngVel,
    DofTorques,
    DofVelocity,
    DofAcceleration,
    FeetAirTime,
    FeetClearance,
    FeetContactNumber,
    Orientation,
    Collision,
    FeetSlip,
    BaseHeight,
    ActionSmoothness1,
    ActionSmoothness2,
    TorqueRate,
}

impl RewardTerm {
    pub const ALL: [RewardTerm; 16] = [
        RewardTerm::JointPosition,
        RewardTerm::TrackingLinVel,
        RewardTerm::TrackingAngVel,
        RewardTerm::DofTorques,
        RewardTerm::DofVelocity,
        RewardTerm::DofAcceleration,
        RewardTerm::FeetAirTime,
        RewardTerm::FeetClearance,
        RewardTerm::FeetContactNumber,
        RewardTerm::Orientation,
        RewardTerm::Collision,
        RewardTerm::FeetSlip,
        RewardTerm::BaseHeight,
        RewardTerm::ActionSmoothness1,
        RewardTerm::ActionSmoothness2,
        RewardTerm::TorqueRate,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|t| *t == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            RewardTerm::JointPosition => "joint_position",
            RewardTerm::TrackingLinVel => "tracking_lin_vel",
            RewardTerm::TrackingAngVel => "tracking_ang_vel",
            RewardTerm::DofTorques => "dof_torques",
            RewardTerm::DofVelocity => "dof_velocity",
            RewardTerm::DofAcceleration => "dof_acceleration",
            RewardTerm::FeetAirTime => "feet_air_time",
            RewardTerm::FeetClearance => "feet_clearance",
            RewardTerm::FeetContactNumber => "feet_contact_number",
            RewardTerm::Orientation => "orientation",
            RewardTerm::Collision => "collision",
            RewardTerm::FeetSlip => "feet_slip",
            RewardTerm::BaseHeight => "base_height",
            RewardTerm::ActionSmoothness1 => "action_smoothness_1",
            RewardTerm::ActionSmoothness2 => "action_smoothness_2",
            RewardTerm::TorqueRate => "torque_rate",
        }
    }
}

/// Per-term scale factors. Defaults are the published reward scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardScales {
    pub joint_position: f64,
    pub tracking_lin_vel: f64,
    pub tracking_ang_vel: f64,
    pub dof_torques: f64,
    pub dof_velocity: f64,
    pub dof_acceleration: f64,
    pub feet_air_time: f64,
    pub feet_clearance: f64,
    pub feet_contact_number: f64,
    pub orientation: f64,
    pub collision: f64,
    pub feet_slip: f64,
    pub base_height: f64,
    pub action_smoothness_1: f64,
    pub action_smoothness_2: f64,
    pub torque_rate: f64,
}

impl Default for RewardScales {
    fn default() -> Self {
        Self {
            joint_position: 3.5,
            tracking_lin_vel: 1.5,
            tracking_ang_vel: 1.4,
            dof_torques: -2.0e-3,
            dof_velocity: -5.0e-4,
            dof_acceleration: -1.0e-7,
            feet_air_time: 2.0,
            feet_clearance: 2.0,
            feet_contact_number: 1.2,
            orientation: 1.0,
            collision: -1.0,
            feet_slip: -5.0e-2,
            base_height: 0.2,
            action_smoothness_1: -0.1,
            action_smoothness_2: -0.1,
            torque_rate: -2.0e-4,
        }
    }
}

impl RewardScales {
    pub fn get(&self, term: RewardTerm) -> f64 {
        match term {
            RewardTerm::JointPosition => self.joint_position,
            RewardTerm::TrackingLinVel => self.tracking_lin_vel,
            RewardTerm::TrackingAngVel => self.tracking_ang_vel,
            RewardTerm::DofTorques => self.dof_torques,
            RewardTerm::DofVelocity => self.dof_velocity,
            RewardTerm::DofAcceleration => self.dof_acceleration,
            RewardTerm::FeetAirTime => self.feet_air_time,
            RewardTerm::FeetClearance => self.feet_clearance,
            RewardTerm::FeetContactNumber => self.feet_contact_number,
            RewardTerm::Orientation => self.orientation,
            RewardTerm::Collision => self.collision,
            RewardTerm::FeetSlip => self.feet_slip,
            RewardTerm::BaseHeight => self.base_height,
            RewardTerm::ActionSmoothness1 => self.action_smoothness_1,
            RewardTerm::ActionSmoothness2 => self.action_smoothness_2,
            RewardTerm::TorqueRate => self.torque_rate,
        }
    }
}

/// Reward constants that live in the run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub scales: RewardScales,
    /// Linear-velocity tracking temperature (m²/s²).
    pub sigma_tracking: f64,
    /// Yaw tracking temperature (rad²/s²).
    pub sigma_yaw: f64,
    /// Air-time swing-displacement decay (1/m).
    pub air_time_decay: f64,
    /// Clearance tolerance (m).
    pub clearance_tol: f64,
    /// Target swing-foot height (m).
    pub target_foot_height: f64,
    /// Target base height (m); None derives the morphology's standing height.
    pub target_base_height: Option<f64>,
    /// Evaluates the orientation row exactly as printed (rewards tilt) instead
    /// of the sign-fixed form that rewards upright posture.
    pub orientation_literal_sign: bool,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            scales: RewardScales::default(),
            sigma_tracking: 0.25,
            sigma_yaw: 0.25,
            air_time_decay: 5.0,
            clearance_tol: 0.01,
            target_foot_height: 0.06,
            target_base_height: None,
            orientation_literal_sign: false,
        }
    }
}

/// Fully resolved reward configuration: parameters plus morphology-derived
/// torque limits, base-height target, and the control period.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    pub params: RewardParams,
    pub tau_max: Vec<f64>,
    pub target_base_height: f64,
    pub control_dt: f64,
}

impl RewardConfig {
    pub fn new(params: RewardParams, morph: &MorphologyConfig, control_dt: f64) -> Self {
        Self {
            tau_max: morph.torque_limits(),
            target_base_height: params.target_base_height.unwrap_or_else(|| morph.standing_height()),
            params,
            control_dt,
        }
    }

    pub fn for_morphology(morph: &MorphologyConfig, control_dt: f64) -> Self {
        Self::new(RewardParams::default(), morph, control_dt)
    }
}

/// Sinusoidal joint references and the commanded stance schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSignals {
    pub q_ref: Vec<f64>,
    pub stance: [bool; 2],
}

/// Per-term values and the scaled total for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown {
    pub unscaled: [f64; 16],
    pub scaled: [f64; 16],
    pub total: f64,
}

impl RewardBreakdown {
    pub fn get(&self, term: RewardTerm) -> (f64, f64) {
        let i = term.index();
        (self.unscaled[i], self.scaled[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (RewardTerm, f64, f64)> + '_ {
        RewardTerm::ALL
            .iter()
            .enumerate()
            .map(|(i, t)| (*t, self.unscaled[i], self.scaled[i]))
    }
}

/// Gait reference: zero when standing, otherwise each joint follows its
/// limb's temporal director scaled by the configured amplitude.
pub fn reference_joint_positions(
    t: f64,
    commands: &CommandVector,
    morph: &MorphologyConfig,
) -> Vec<f64> {
    let dof = morph.dof_total();
    if commands.standing {
        return vec![0.0; dof];
    }
    let mut out = Vec::with_capacity(dof);
    for limb in morph.limbs() {
        let director = temporal_director(t, morph.gait_rate, limb.phase_offset);
        for joint in &limb.joints {
            out.push(joint.gait_amplitude * director);
        }
    }
    out
}

/// Evaluates every reward term from one snapshot.
pub fn compute_reward_terms(
    snap: &StepSnapshot,
    refs: &ReferenceSignals,
    cfg: &RewardConfig,
    morph: &MorphologyConfig,
) -> Result<RewardBreakdown> {
    let dof = morph.dof_total();
    if snap.q.len() != dof || refs.q_ref.len() != dof {
        return Err(WalkerError::contract(
            "snapshot/reference DoF mismatch in reward computation".to_string(),
        ));
    }
    if cfg.tau_max.len() != dof {
        return Err(WalkerError::contract(
            "torque limit vector does not match DoF total (term dof_torques)".to_string(),
        ));
    }
    let p = &cfg.params;
    let q_default = morph.q_default();
    let dt = cfg.control_dt;

    let mut unscaled = [0.0; 16];

    // Joint position: exp(-||q - q_default - q_ref||).
    let posture_err: f64 = snap
        .q
        .iter()
        .zip(&q_default)
        .zip(&refs.q_ref)
        .map(|((q, d), r)| (q - d - r).powi(2))
        .sum::<f64>()
        .sqrt();
    unscaled[RewardTerm::JointPosition.index()] = (-posture_err).exp();

    // Tracking linear velocity: exp(-||v_cmd - v_b||² / sigma).
    let (cmd_vx, cmd_vy) = if snap.commands.standing {
        (0.0, 0.0)
    } else {
        (snap.commands.vx, snap.commands.vy)
    };
    let v_err_sq = (cmd_vx - snap.torso_vx).powi(2) + cmd_vy.powi(2);
    unscaled[RewardTerm::TrackingLinVel.index()] = (-v_err_sq / p.sigma_tracking).exp();

    // Tracking angular velocity: exp(-(w_cmd_z - w_b_z)² / sigma_yaw); planar
    // yaw rate is zero.
    let yaw_err_sq = snap.commands.yaw_rate.powi(2);
    unscaled[RewardTerm::TrackingAngVel.index()] = (-yaw_err_sq / p.sigma_yaw).exp();

    // DoF torques: sum (tau / tau_max)².
    unscaled[RewardTerm::DofTorques.index()] = snap
        .torques
        .iter()
        .zip(&cfg.tau_max)
        .map(|(t, m)| (t / m).powi(2))
        .sum();

    // DoF velocity: sum qd².
    unscaled[RewardTerm::DofVelocity.index()] = snap.qd.iter().map(|v| v * v).sum();

    // DoF acceleration: sum ((qd_t - qd_{t-1}) / dt)².
    unscaled[RewardTerm::DofAcceleration.index()] = snap
        .qd
        .iter()
        .zip(&snap.prev_qd)
        .map(|(a, b)| ((a - b) / dt).powi(2))
        .sum();

    // Feet air time: credited at touchdown for the completed swing.
    unscaled[RewardTerm::FeetAirTime.index()] = snap
        .touchdowns
        .iter()
        .map(|td| td.air_time * (-p.air_time_decay * td.dx.abs()).exp())
        .sum();

    // Feet clearance: count feet inside the target-height band.
    unscaled[RewardTerm::FeetClearance.index()] = snap
        .foot_heights
        .iter()
        .filter(|z| (**z - p.target_foot_height).abs() < p.clearance_tol)
        .count() as f64;

    // Feet contact number: +1 per foot matching its stance mask, -0.3 otherwise.
    unscaled[RewardTerm::FeetContactNumber.index()] = snap
        .foot_contacts
        .iter()
        .zip(&refs.stance)
        .map(|(c, s)| if c == s { 1.0 } else { -0.3 })
        .sum();

    // Orientation: upright posture is maximal in the sign-fixed default; the
    // literal flag evaluates the row exactly as printed.
    let tilt = snap.pitch.abs();
    let g_proj = snap.gravity_projection;
    unscaled[RewardTerm::Orientation.index()] = if p.orientation_literal_sign {
        tilt.exp() + g_proj.exp()
    } else {
        (-tilt).exp() + (-g_proj).exp()
    };

    // Collision: bodies other than feet with contact force above 0.1 N.
    unscaled[RewardTerm::Collision.index()] =
        snap.collision_forces.iter().filter(|f| **f > 0.1).count() as f64;

    // Feet slip: contact-masked squared foot speed.
    unscaled[RewardTerm::FeetSlip.index()] = snap
        .foot_contacts
        .iter()
        .zip(&snap.foot_velocities)
        .map(|(c, (vx, vz))| if *c { vx * vx + vz * vz } else { 0.0 })
        .sum();

    // Base height: exp(-|h - h_target|).
    unscaled[RewardTerm::BaseHeight.index()] =
        (-(snap.torso_z - cfg.target_base_height).abs()).exp();

    // Action smoothness 1: sum (a_t - a_{t-1})².
    unscaled[RewardTerm::ActionSmoothness1.index()] = snap
        .action
        .iter()
        .zip(&snap.prev_action)
        .map(|(a, b)| (a - b).powi(2))
        .sum();

    // Action smoothness 2: sum (a_t - 2 a_{t-1} + a_{t-2})².
    unscaled[RewardTerm::ActionSmoothness2.index()] = snap
        .action
        .iter()
        .zip(&snap.prev_action)
        .zip(&snap.prev_prev_action)
        .map(|((a, b), c)| (a - 2.0 * b + c).powi(2))
        .sum();

    // Torque rate: sum ((tau_t - tau_{t-1}) / (tau_max dt))².
    unscaled[RewardTerm::TorqueRate.index()] = snap
        .torques
        .iter()
        .zip(&snap.prev_torques)
        .zip(&cfg.tau_max)
        .map(|((t, pt), m)| ((t - pt) / (m * dt)).powi(2))
        .sum();

    let mut scaled = [0.0; 16];
    let mut total = 0.0;
    for (i, term) in RewardTerm::ALL.iter().enumerate() {
        scaled[i] = p.scales.get(*term) * unscaled[i];
        total += scaled[i];
    }
    Ok(RewardBreakdown { unscaled, scaled, total })
}
