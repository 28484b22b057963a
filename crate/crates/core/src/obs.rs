//! Observation construction: per-agent actor observations, group-concatenated
//! actor inputs, the privileged critic observation, the temporal director,
//! stance masks, and command sampling.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domrand::PhysicsOverrides;
use crate::env::morphology::{LimbGroup, MorphologyConfig, Side};
use crate::env::state::{CommandVector, StepSnapshot};
use crate::error::{Result, WalkerError};

/// Identifies one limb agent within the roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentId {
    pub group: LimbGroup,
    pub side: Side,
}

impl AgentId {
    pub const LEG_LEFT: AgentId = AgentId { group: LimbGroup::Legs, side: Side::Left };
    pub const LEG_RIGHT: AgentId = AgentId { group: LimbGroup::Legs, side: Side::Right };
    pub const ARM_LEFT: AgentId = AgentId { group: LimbGroup::Arms, side: Side::Left };
    pub const ARM_RIGHT: AgentId = AgentId { group: LimbGroup::Arms, side: Side::Right };

    /// Fixed side-to-bit mapping: left = (1, 0), right = (0, 1).
    pub fn one_hot(&self) -> [f64; 2] {
        match self.side {
            Side::Left => [1.0, 0.0],
            Side::Right => [0.0, 1.0],
        }
    }

    /// Index of this agent's limb in the morphology's global limb order.
    pub fn limb_index(&self) -> usize {
        match (self.group, self.side) {
            (LimbGroup::Legs, Side::Left) => 0,
            (LimbGroup::Legs, Side::Right) => 1,
            (LimbGroup::Arms, Side::Left) => 2,
            (LimbGroup::Arms, Side::Right) => 3,
        }
    }

    pub fn label(&self) -> &'static str {
        match (self.group, self.side) {
            (LimbGroup::Legs, Side::Left) => "leg-left",
            (LimbGroup::Legs, Side::Right) => "leg-right",
            (LimbGroup::Arms, Side::Left) => "arm-left",
            (LimbGroup::Arms, Side::Right) => "arm-right",
        }
    }
}

/// Per-agent actor observation layout. Field order is fixed:
/// q, q̇, previous action (each `dof_agent` wide), temporal guidance (2),
/// torso Euler angles (3), torso angular velocity (3), commands (4),
/// one-hot agent id (2). Total width `3 * dof_agent + 14`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLayout {
    pub dof_agent: usize,
}

impl ObservationLayout {
    pub fn width(&self) -> usize {
        3 * self.dof_agent + 14
    }

    /// (name, width) pairs in packing order.
    pub fn fields(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("q", self.dof_agent),
            ("qd", self.dof_agent),
            ("prev_action", self.dof_agent),
            ("phi", 2),
            ("euler", 3),
            ("omega", 3),
            ("commands", 4),
            ("one_hot", 2),
        ]
    }
}

/// Privileged critic observation layout. Field order is fixed:
/// q, q̇, previous action, position deviation (each `dof_total` wide),
/// temporal guidance (2), commands (4), linear velocity (3), Euler angles (3),
/// angular velocity (3), push forces (2), push torques (3), friction (1),
/// body mass (1), stance mask (2), contact mask (2).
/// Total width `4 * dof_total + 26`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticLayout {
    pub dof_total: usize,
}

impl CriticLayout {
    pub fn width(&self) -> usize {
        4 * self.dof_total + 26
    }

    pub fn fields(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("q", self.dof_total),
            ("qd", self.dof_total),
            ("prev_action", self.dof_total),
            ("deviation", self.dof_total),
            ("phi", 2),
            ("commands", 4),
            ("lin_vel", 3),
            ("euler", 3),
            ("omega", 3),
            ("push_force", 2),
            ("push_torque", 3),
            ("friction", 1),
            ("body_mass", 1),
            ("stance_mask", 2),
            ("contact_mask", 2),
        ]
    }
}

/// The per-limb gait clock: `sin(2π (k t + Δ))`.
///
/// The phase is evaluated in half-cycles so a half-cycle offset becomes an
/// exact integer shift: antiphase limbs produce bitwise-negated directors,
/// and quarter phases hit 0 and ±1 exactly.
pub fn temporal_director(t: f64, k: f64, delta: f64) -> f64 {
    // Whole half-cycles of the offset only flip the sign; keeping them out of
    // the running phase preserves the fraction bits across antiphase limbs.
    let two_delta = 2.0 * delta;
    let offset_halves = two_delta.floor();
    let p = 2.0 * (k * t) + (two_delta - offset_halves);
    let p_floor = p.floor();
    let frac = p - p_floor;
    let n = p_floor + offset_halves;
    let sign = if n.rem_euclid(2.0) == 0.0 { 1.0 } else { -1.0 };
    sign * half_sin(frac)
}

/// `sin(π u)` for `u` in [0, 1), folded onto the first quarter wave.
#[inline]
fn half_sin(u: f64) -> f64 {
    if u == 0.5 {
        1.0
    } else if u < 0.5 {
        (std::f64::consts::PI * u).sin()
    } else {
        (std::f64::consts::PI * (1.0 - u)).sin()
    }
}

/// Per-leg stance schedule: leg i is in stance when its director is at or
/// below zero. A standing command forces both legs into stance.
pub fn stance_mask(t: f64, k: f64, phases: &[f64; 2], standing: bool) -> [bool; 2] {
    if standing {
        return [true, true];
    }
    [
        temporal_director(t, k, phases[0]) <= 0.0,
        temporal_director(t, k, phases[1]) <= 0.0,
    ]
}

/// Temporal guidance pair for a group: the two leg directors for the leg
/// group; for the arm group the arm-phase pair (each arm antiphase to its
/// same-side leg, following natural arm swing).
pub fn group_phase_pair(morph: &MorphologyConfig, group: LimbGroup, t: f64) -> [f64; 2] {
    let k = morph.gait_rate;
    match group {
        LimbGroup::Legs => [
            temporal_director(t, k, morph.legs[0].phase_offset),
            temporal_director(t, k, morph.legs[1].phase_offset),
        ],
        LimbGroup::Arms => [
            temporal_director(t, k, morph.arms[0].phase_offset),
            temporal_director(t, k, morph.arms[1].phase_offset),
        ],
    }
}

/// Observation noise settings; the critic stays noiseless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObsNoise {
    pub std: f64,
}

impl Default for ObsNoise {
    fn default() -> Self {
        Self { std: 0.0 }
    }
}

/// Builds one agent's observation vector.
///
/// Planar-unobservable slots (roll, yaw, their rates) are zero to preserve
/// the layout. Additive Gaussian noise applies to the sensor-like fields
/// (q, q̇, Euler angles, angular velocities) only.
pub fn build_agent_obs<R: Rng>(
    snap: &StepSnapshot,
    agent: AgentId,
    morph: &MorphologyConfig,
    prev_action: &[f64],
    obs_time: f64,
    noise: ObsNoise,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let limb_idx = agent.limb_index();
    if limb_idx >= morph.n_limbs() {
        return Err(WalkerError::contract(format!(
            "agent {} has no limb in morphology {}",
            agent.label(),
            morph.name
        )));
    }
    let dof = morph.limb(limb_idx).dof();
    let offset = morph.limb_joint_offset(limb_idx);
    if prev_action.len() != morph.dof_total() {
        return Err(WalkerError::contract(
            "previous action length does not match DoF total".to_string(),
        ));
    }
    let layout = ObservationLayout { dof_agent: dof };
    let mut out = Vec::with_capacity(layout.width());
    let noisy = |v: f64, rng: &mut R| {
        if noise.std > 0.0 {
            v + noise.std * rng.sample::<f64, _>(StandardNormal)
        } else {
            v
        }
    };
    for i in 0..dof {
        out.push(noisy(snap.q[offset + i], rng));
    }
    for i in 0..dof {
        out.push(noisy(snap.qd[offset + i], rng));
    }
    out.extend_from_slice(&prev_action[offset..offset + dof]);
    let phi = group_phase_pair(morph, agent.group, obs_time);
    out.extend_from_slice(&phi);
    // Euler angles (roll, pitch, yaw): planar keeps pitch only.
    out.push(noisy(0.0, rng));
    out.push(noisy(snap.pitch, rng));
    out.push(noisy(0.0, rng));
    // Angular velocity (x, y, z): pitch rate on the y axis.
    out.push(noisy(0.0, rng));
    out.push(noisy(snap.pitch_rate, rng));
    out.push(noisy(0.0, rng));
    out.extend_from_slice(&snap.commands.as_array());
    out.extend_from_slice(&agent.one_hot());
    debug_assert_eq!(out.len(), layout.width());
    Ok(out)
}

/// Concatenates the two agents' observations, left first.
pub fn build_group_input(left: &[f64], right: &[f64]) -> Result<Vec<f64>> {
    if left.len() != right.len() {
        return Err(WalkerError::contract(format!(
            "group halves differ in width: {} vs {}",
            left.len(),
            right.len()
        )));
    }
    let mut out = Vec::with_capacity(left.len() * 2);
    out.extend_from_slice(left);
    out.extend_from_slice(right);
    Ok(out)
}

/// Builds the privileged critic observation: global state, position
/// deviations, true randomization values, push forces, stance and contact
/// masks. Noiseless.
pub fn build_critic_obs(
    snap: &StepSnapshot,
    privileged: &PhysicsOverrides,
    morph: &MorphologyConfig,
    prev_action: &[f64],
    obs_time: f64,
    total_mass: f64,
) -> Result<Vec<f64>> {
    let dof = morph.dof_total();
    if prev_action.len() != dof {
        return Err(WalkerError::contract(
            "previous action length does not match DoF total".to_string(),
        ));
    }
    let layout = CriticLayout { dof_total: dof };
    let mut out = Vec::with_capacity(layout.width());
    out.extend_from_slice(&snap.q);
    out.extend_from_slice(&snap.qd);
    out.extend_from_slice(prev_action);
    // Position deviation: PD target minus actual.
    for i in 0..dof {
        out.push(snap.q_target[i] - snap.q[i]);
    }
    out.extend_from_slice(&group_phase_pair(morph, LimbGroup::Legs, obs_time));
    out.extend_from_slice(&snap.commands.as_array());
    // Linear velocity (x, y, z).
    out.push(snap.torso_vx);
    out.push(0.0);
    out.push(snap.torso_vz);
    // Euler angles and angular velocity.
    out.push(0.0);
    out.push(snap.pitch);
    out.push(0.0);
    out.push(0.0);
    out.push(snap.pitch_rate);
    out.push(0.0);
    // Push forces (planar horizontal) and torques (zero at the root).
    out.push(snap.push_force.0);
    out.push(0.0);
    out.extend_from_slice(&[0.0, 0.0, 0.0]);
    out.push(privileged.friction);
    out.push(total_mass);
    let stance = stance_mask(
        obs_time,
        morph.gait_rate,
        &morph.leg_phases(),
        snap.commands.standing,
    );
    out.push(stance[0] as u8 as f64);
    out.push(stance[1] as u8 as f64);
    out.push(snap.foot_contacts[0] as u8 as f64);
    out.push(snap.foot_contacts[1] as u8 as f64);
    debug_assert_eq!(out.len(), layout.width());
    Ok(out)
}

/// Splits a packed vector into (field name, slice) pairs per the layout.
/// Inverts the builders field-by-field.
pub fn unpack<'a>(
    packed: &'a [f64],
    fields: &[(&'static str, usize)],
) -> Result<Vec<(&'static str, &'a [f64])>> {
    let total: usize = fields.iter().map(|(_, w)| w).sum();
    if packed.len() != total {
        return Err(WalkerError::contract(format!(
            "packed width {} does not match layout width {total}",
            packed.len()
        )));
    }
    let mut out = Vec::with_capacity(fields.len());
    let mut cursor = 0;
    for &(name, width) in fields {
        out.push((name, &packed[cursor..cursor + width]));
        cursor += width;
    }
    Ok(out)
}

/// Command sampling ranges; one command is held constant per episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandRanges {
    pub standing_probability: f64,
    pub vx_low: f64,
    pub vx_high: f64,
}

impl Default for CommandRanges {
    fn default() -> Self {
        Self {
            standing_probability: 0.1,
            vx_low: 0.2,
            vx_high: 1.0,
        }
    }
}

/// Draws one episode command: standing with the configured probability,
/// otherwise a forward-velocity command uniform on its range. Planar mode
/// keeps v_y and the yaw rate at zero.
pub fn sample_commands<R: Rng>(rng: &mut R, ranges: &CommandRanges) -> CommandVector {
    if ranges.standing_probability > 0.0 && rng.random::<f64>() < ranges.standing_probability {
        return CommandVector::standing();
    }
    let vx = if ranges.vx_low == ranges.vx_high {
        ranges.vx_low
    } else {
        rng.random_range(ranges.vx_low..ranges.vx_high)
    };
    CommandVector::forward(vx)
}
