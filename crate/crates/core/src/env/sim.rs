//! Deterministic planar articulated-walker simulator.
//!
//! Torso plus configurable limb chains, PD joint actuation, semi-implicit
//! Euler integration at 240 Hz under a 60 Hz control rate, spring-damper
//! ground contact with Coulomb friction, and external-push injection.
//!
//! The dynamics use a lumped-mass articulated approximation: the torso
//! carries the robot's translational mass and is driven by gravity, contact,
//! and push forces; each joint integrates its own rotational dynamics under
//! motor torque, exact gravity torque of its distal chain, and foot contact
//! mapped through the chain Jacobian. Joint gravity uses the torso's proper
//! vertical acceleration, so airborne limbs are weightless and a pinned-base
//! limb behaves as a physical pendulum.

use std::collections::VecDeque;

use rand::Rng;

use crate::domrand::{PhysicsOverrides, StepPerturbation};
use crate::env::contact::{contact_force, ContactForce, GroundParams};
use crate::env::morphology::MorphologyConfig;
use crate::env::state::{CommandVector, StepSnapshot, TouchdownEvent, WalkerState};
use crate::error::{Result, WalkerError};

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    /// Control period (s).
    pub control_dt: f64,
    /// Physics substeps per control step.
    pub substeps: usize,
    /// Pins the torso in place (pendulum-style test rigs).
    pub fixed_base: bool,
    /// Uniform joint-angle noise applied at reset (rad).
    pub reset_noise: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            control_dt: 1.0 / 60.0,
            substeps: 4,
            fixed_base: false,
            reset_noise: 0.05,
        }
    }
}

/// Forward kinematics of one limb chain.
#[derive(Debug, Clone)]
pub struct LimbKinematics {
    /// Joint positions followed by the chain tip: `dof + 1` points.
    pub points: Vec<(f64, f64)>,
    /// World velocities of the same points.
    pub velocities: Vec<(f64, f64)>,
    /// Absolute link angles from the downward vertical.
    pub link_angles: Vec<f64>,
    /// Absolute link angular rates.
    pub link_rates: Vec<f64>,
}

impl LimbKinematics {
    pub fn tip(&self) -> (f64, f64) {
        *self.points.last().unwrap()
    }

    pub fn tip_velocity(&self) -> (f64, f64) {
        *self.velocities.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy)]
struct ActivePush {
    fx: f64,
    fz: f64,
    until: f64,
}

/// The walker simulator. Deterministic given (reset rng, overrides, actions,
/// perturbations); instances share no mutable data and may run in parallel.
#[derive(Debug, Clone)]
pub struct WalkerSim {
    morph: MorphologyConfig,
    cfg: SimConfig,
    ground: GroundParams,
    overrides: PhysicsOverrides,
    state: WalkerState,
    /// Received raw actions, newest last (delay buffer + smoothness history).
    action_history: VecDeque<Vec<f64>>,
    active_push: Option<ActivePush>,
    /// Cached per-joint inertia about its own axis (default posture, scaled).
    joint_inertia: Vec<f64>,
    total_mass: f64,
    /// Filled by the latest substep for the snapshot.
    last_foot_heights: [f64; 2],
    last_foot_velocities: [(f64, f64); 2],
    last_collision_forces: Vec<f64>,
    pending_touchdowns: Vec<TouchdownEvent>,
}

impl WalkerSim {
    pub fn new(morph: MorphologyConfig, cfg: SimConfig) -> Result<Self> {
        morph.validate()?;
        let dof = morph.dof_total();
        let overrides = PhysicsOverrides::nominal();
        let mut sim = Self {
            joint_inertia: vec![0.0; dof],
            total_mass: 0.0,
            state: WalkerState::zeroed(dof),
            action_history: VecDeque::new(),
            active_push: None,
            last_foot_heights: [0.0; 2],
            last_foot_velocities: [(0.0, 0.0); 2],
            last_collision_forces: Vec::new(),
            pending_touchdowns: Vec::new(),
            ground: GroundParams::default(),
            overrides,
            morph,
            cfg,
        };
        sim.apply_overrides(overrides);
        Ok(sim)
    }

    pub fn morphology(&self) -> &MorphologyConfig {
        &self.morph
    }

    pub fn state(&self) -> &WalkerState {
        &self.state
    }

    /// Direct state access for test rigs and diagnostics.
    pub fn state_mut(&mut self) -> &mut WalkerState {
        &mut self.state
    }

    pub fn overrides(&self) -> &PhysicsOverrides {
        &self.overrides
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn set_ground(&mut self, ground: GroundParams) {
        self.ground = ground;
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    /// Root height when standing at the default posture.
    pub fn nominal_height(&self) -> f64 {
        self.morph.standing_height()
    }

    /// The most recent raw action, or zeros right after reset.
    pub fn last_action(&self) -> Vec<f64> {
        self.action_history
            .back()
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.morph.dof_total()])
    }

    /// Current external push force (N), zero when none is active.
    pub fn push_force(&self) -> (f64, f64) {
        match self.active_push {
            Some(p) if self.state.time < p.until => (p.fx, p.fz),
            _ => (0.0, 0.0),
        }
    }

    fn apply_overrides(&mut self, overrides: PhysicsOverrides) {
        self.overrides = overrides;
        let scale = overrides.mass_scale;
        self.total_mass = self.morph.torso_mass
            + self
                .morph
                .limbs()
                .flat_map(|l| &l.joints)
                .map(|j| j.link_mass * scale)
                .sum::<f64>();
        // Inertia of each joint's distal chain about the joint, frozen at the
        // default posture (rod inertia plus point-mass offset).
        let mut idx = 0;
        for limb in self.morph.limbs() {
            let n = limb.joints.len();
            // Relative positions of joints and link COMs along the chain.
            let mut alpha = 0.0;
            let mut pos = (0.0, 0.0);
            let mut joint_pos = Vec::with_capacity(n);
            let mut com_pos = Vec::with_capacity(n);
            for j in &limb.joints {
                alpha += j.q_default;
                joint_pos.push(pos);
                com_pos.push((pos.0 + j.link_com * alpha.sin(), pos.1 - j.link_com * alpha.cos()));
                pos = (pos.0 + j.link_length * alpha.sin(), pos.1 - j.link_length * alpha.cos());
            }
            for jj in 0..n {
                let mut inertia = 0.0;
                for kk in jj..n {
                    let m = limb.joints[kk].link_mass * scale;
                    let dx = com_pos[kk].0 - joint_pos[jj].0;
                    let dz = com_pos[kk].1 - joint_pos[jj].1;
                    let rod = m * limb.joints[kk].link_length.powi(2) / 12.0;
                    inertia += m * (dx * dx + dz * dz) + rod;
                }
                self.joint_inertia[idx + jj] = inertia;
            }
            idx += n;
        }
    }

    /// Resets to the default standing posture with small uniform joint noise,
    /// placing the lowest foot exactly at the ground.
    pub fn reset<R: Rng>(&mut self, overrides: PhysicsOverrides, rng: &mut R) -> Result<()> {
        self.apply_overrides(overrides);
        let dof = self.morph.dof_total();
        self.state = WalkerState::zeroed(dof);
        let defaults = self.morph.q_default();
        let limits = self.morph.joint_vec(|j| j.angle_limits);
        for i in 0..dof {
            let noise = if self.cfg.reset_noise > 0.0 {
                rng.random_range(-self.cfg.reset_noise..self.cfg.reset_noise)
            } else {
                0.0
            };
            self.state.q[i] = (defaults[i] + noise).clamp(limits[i].0, limits[i].1);
        }
        // Place the root so the lowest leg tip touches z = 0.
        self.state.z = 0.0;
        let lowest = self
            .leg_kinematics()
            .iter()
            .map(|k| k.tip().1)
            .fold(f64::INFINITY, f64::min);
        self.state.z = -lowest;
        if self.state.z <= 0.05 {
            return Err(WalkerError::config(
                "infeasible morphology: reset posture puts the foot at or below the root"
                    .to_string(),
            ));
        }
        let tip_x = [self.limb_kinematics(0).tip().0, self.limb_kinematics(1).tip().0];
        for (i, foot) in self.state.feet.iter_mut().enumerate() {
            foot.contact = false;
            foot.air_time = 0.0;
            foot.swing_start_x = tip_x[i];
        }
        self.action_history.clear();
        self.active_push = None;
        self.pending_touchdowns.clear();
        Ok(())
    }

    /// Applies `force_xz` at the torso for `duration` seconds of simulated time.
    pub fn apply_push(&mut self, force_xz: (f64, f64), duration: f64) {
        if force_xz == (0.0, 0.0) || duration <= 0.0 {
            return;
        }
        self.active_push = Some(ActivePush {
            fx: force_xz.0,
            fz: force_xz.1,
            until: self.state.time + duration,
        });
    }

    /// Kinematics of every limb, legs first.
    pub fn kinematics(&self) -> Vec<LimbKinematics> {
        (0..self.morph.n_limbs()).map(|i| self.limb_kinematics(i)).collect()
    }

    fn leg_kinematics(&self) -> Vec<LimbKinematics> {
        (0..2).map(|i| self.limb_kinematics(i)).collect()
    }

    fn limb_kinematics(&self, limb_idx: usize) -> LimbKinematics {
        let limb = self.morph.limb(limb_idx);
        let offset = self.morph.limb_joint_offset(limb_idx);
        let s = &self.state;
        let (sin_p, cos_p) = s.pitch.sin_cos();
        // Attachment point rotates with the torso.
        let ax = limb.attach_offset.0 * cos_p - limb.attach_offset.1 * sin_p;
        let az = limb.attach_offset.0 * sin_p + limb.attach_offset.1 * cos_p;
        let mut pos = (s.x + ax, s.z + az);
        let mut vel = (s.vx - s.pitch_rate * az, s.vz + s.pitch_rate * ax);
        let mut alpha = s.pitch;
        let mut rate = s.pitch_rate;
        let n = limb.joints.len();
        let mut points = Vec::with_capacity(n + 1);
        let mut velocities = Vec::with_capacity(n + 1);
        let mut link_angles = Vec::with_capacity(n);
        let mut link_rates = Vec::with_capacity(n);
        points.push(pos);
        velocities.push(vel);
        for (k, joint) in limb.joints.iter().enumerate() {
            alpha += s.q[offset + k];
            rate += s.qd[offset + k];
            link_angles.push(alpha);
            link_rates.push(rate);
            let (sa, ca) = alpha.sin_cos();
            pos = (pos.0 + joint.link_length * sa, pos.1 - joint.link_length * ca);
            vel = (
                vel.0 + joint.link_length * rate * ca,
                vel.1 + joint.link_length * rate * sa,
            );
            points.push(pos);
            velocities.push(vel);
        }
        LimbKinematics { points, velocities, link_angles, link_rates }
    }

    /// Effective joint inertia (distal chain plus armature).
    pub fn joint_inertia(&self, joint: usize) -> f64 {
        self.joint_inertia[joint] + self.overrides.joint_armature
    }


    /// One control step: PD torques from delayed targets, four physics
    /// substeps with per-step randomization, snapshot of everything the
    /// reward and observation modules need.
    pub fn step(
        &mut self,
        action: &[f64],
        commands: CommandVector,
        pert: &StepPerturbation,
    ) -> Result<StepSnapshot> {
        let dof = self.morph.dof_total();
        if action.len() != dof {
            return Err(WalkerError::contract(format!(
                "action length {} does not match DoF total {dof}",
                action.len()
            )));
        }
        if pert.torque_noise.len() != dof {
            return Err(WalkerError::contract(
                "torque noise length does not match DoF total".to_string(),
            ));
        }

        self.action_history.push_back(action.to_vec());
        while self.action_history.len() > 8 {
            self.action_history.pop_front();
        }
        let effective = self.history_back(pert.delay_steps);
        let defaults = self.morph.q_default();
        let q_target: Vec<f64> = defaults
            .iter()
            .zip(&effective)
            .map(|(d, a)| d + self.morph.action_scale * a)
            .collect();

        if let Some(push) = pert.push {
            self.apply_push((push.force_x, 0.0), push.duration);
        }

        let prev_qd = self.state.qd.clone();
        let prev_torques = self.state.torques.clone();

        self.pending_touchdowns.clear();
        let dt = self.cfg.control_dt / self.cfg.substeps as f64;
        for _ in 0..self.cfg.substeps {
            self.substep(&q_target, &pert.torque_noise, dt)?;
        }
        self.state.time += self.cfg.control_dt;
        self.state.step_count += 1;

        let a_t = action.to_vec();
        let a_prev = self.history_back(1);
        let a_prev_prev = self.history_back(2);

        Ok(StepSnapshot {
            time: self.state.time,
            q: self.state.q.clone(),
            qd: self.state.qd.clone(),
            prev_qd,
            torques: self.state.torques.clone(),
            prev_torques,
            action: a_t,
            prev_action: a_prev,
            prev_prev_action: a_prev_prev,
            q_target,
            torso_x: self.state.x,
            torso_z: self.state.z,
            pitch: self.state.pitch,
            torso_vx: self.state.vx,
            torso_vz: self.state.vz,
            pitch_rate: self.state.pitch_rate,
            gravity_projection: self.state.pitch.sin().abs(),
            foot_heights: self.last_foot_heights,
            foot_velocities: self.last_foot_velocities,
            foot_contacts: [self.state.feet[0].contact, self.state.feet[1].contact],
            foot_air_times: [self.state.feet[0].air_time, self.state.feet[1].air_time],
            touchdowns: self.pending_touchdowns.clone(),
            collision_forces: self.last_collision_forces.clone(),
            commands,
            push_force: self.push_force(),
        })
    }

    /// Snapshot of the current state without stepping, for observation
    /// building before an action is chosen. Motion-difference fields repeat
    /// the current frame; touchdown events are empty.
    pub fn observe(&self, commands: CommandVector) -> StepSnapshot {
        let last = self.last_action();
        let prev = self.history_back(1);
        let defaults = self.morph.q_default();
        let q_target: Vec<f64> = defaults
            .iter()
            .zip(&last)
            .map(|(d, a)| d + self.morph.action_scale * a)
            .collect();
        let legs: Vec<LimbKinematics> = (0..2).map(|i| self.limb_kinematics(i)).collect();
        StepSnapshot {
            time: self.state.time,
            q: self.state.q.clone(),
            qd: self.state.qd.clone(),
            prev_qd: self.state.qd.clone(),
            torques: self.state.torques.clone(),
            prev_torques: self.state.torques.clone(),
            action: last.clone(),
            prev_action: prev.clone(),
            prev_prev_action: self.history_back(2),
            q_target,
            torso_x: self.state.x,
            torso_z: self.state.z,
            pitch: self.state.pitch,
            torso_vx: self.state.vx,
            torso_vz: self.state.vz,
            pitch_rate: self.state.pitch_rate,
            gravity_projection: self.state.pitch.sin().abs(),
            foot_heights: [legs[0].tip().1, legs[1].tip().1],
            foot_velocities: [legs[0].tip_velocity(), legs[1].tip_velocity()],
            foot_contacts: [self.state.feet[0].contact, self.state.feet[1].contact],
            foot_air_times: [self.state.feet[0].air_time, self.state.feet[1].air_time],
            touchdowns: Vec::new(),
            collision_forces: self.last_collision_forces.clone(),
            commands,
            push_force: self.push_force(),
        }
    }

    /// Action `steps_back` control steps before the newest, repeating the
    /// oldest frame during warm-up.
    fn history_back(&self, steps_back: usize) -> Vec<f64> {
        if self.action_history.is_empty() {
            return vec![0.0; self.morph.dof_total()];
        }
        let last = self.action_history.len() - 1;
        let idx = last.saturating_sub(steps_back);
        self.action_history[idx].clone()
    }

    fn substep(&mut self, q_target: &[f64], torque_noise: &[f64], dt: f64) -> Result<()> {
        let g = self.overrides.gravity;
        let mu = self.overrides.friction;
        let kinematics = self.kinematics();

        // Foot contacts (legs only). Normal force follows the spring-damper
        // law; the tangent uses a stick-slip anchor spring clamped by the
        // friction cone, so planted feet hold their ground instead of
        // skating on the viscous model.
        let mut foot_contact = [ContactForce::default(); 2];
        for leg in 0..2 {
            let tip = kinematics[leg].tip();
            let tip_vel = kinematics[leg].tip_velocity();
            let mut f = contact_force(tip.1, tip_vel.0, tip_vel.1, &self.ground, mu);
            if tip.1 < 0.0 {
                let anchor = *self.state.feet[leg].anchor_x.get_or_insert(tip.0);
                let cone = mu * f.normal;
                let raw = -self.ground.stick_stiffness * (tip.0 - anchor)
                    - self.ground.stick_damping * tip_vel.0;
                f.tangent = raw.clamp(-cone, cone);
                if raw != f.tangent {
                    // Sliding: drag the anchor so the spring sits at the cone.
                    self.state.feet[leg].anchor_x = Some(
                        tip.0
                            + (f.tangent + self.ground.stick_damping * tip_vel.0)
                                / self.ground.stick_stiffness,
                    );
                }
            } else {
                self.state.feet[leg].anchor_x = None;
            }
            foot_contact[leg] = f;
            self.last_foot_heights[leg] = tip.1;
            self.last_foot_velocities[leg] = tip_vel;
        }

        // Collision contacts on non-foot bodies: torso root, leg knees, arm tips.
        self.last_collision_forces.clear();
        let mut collision: Vec<((f64, f64), ContactForce)> = Vec::new();
        {
            let add_point = |sim: &WalkerSim,
                                 out: &mut Vec<((f64, f64), ContactForce)>,
                                 forces: &mut Vec<f64>,
                                 point: (f64, f64),
                                 vel: (f64, f64)| {
                let mut f = contact_force(point.1, vel.0, vel.1, &sim.ground, mu);
                if f.normal > 0.0 {
                    let rz = point.1 - sim.state.z;
                    let inv_eff = 1.0 / sim.total_mass
                        + if sim.cfg.fixed_base { 0.0 } else { rz * rz / sim.morph.torso_inertia };
                    let k_eff = sim.ground.k_tangent / (1.0 + sim.ground.k_tangent * dt * inv_eff);
                    f.tangent = (-k_eff * vel.0).clamp(-mu * f.normal, mu * f.normal);
                }
                forces.push((f.normal.powi(2) + f.tangent.powi(2)).sqrt());
                out.push((point, f));
            };
            let mut forces = std::mem::take(&mut self.last_collision_forces);
            add_point(
                self,
                &mut collision,
                &mut forces,
                (self.state.x, self.state.z),
                (self.state.vx, self.state.vz),
            );
            for leg in 0..2 {
                if kinematics[leg].points.len() > 2 {
                    add_point(
                        self,
                        &mut collision,
                        &mut forces,
                        kinematics[leg].points[2],
                        kinematics[leg].velocities[2],
                    );
                }
            }
            for arm in 2..self.morph.n_limbs() {
                add_point(
                    self,
                    &mut collision,
                    &mut forces,
                    kinematics[arm].tip(),
                    kinematics[arm].tip_velocity(),
                );
            }
            self.last_collision_forces = forces;
        }

        // Motor torques: PD toward the (delayed) targets plus noise, saturated.
        let dof = self.morph.dof_total();
        let mut torques = vec![0.0; dof];
        {
            let mut idx = 0;
            for limb in self.morph.limbs() {
                for joint in &limb.joints {
                    let kp = joint.kp * self.overrides.kp_scale;
                    let kd = joint.kd * self.overrides.kd_scale;
                    let raw = kp * (q_target[idx] - self.state.q[idx]) - kd * self.state.qd[idx]
                        + torque_noise[idx];
                    torques[idx] = raw.clamp(-joint.torque_limit, joint.torque_limit);
                    idx += 1;
                }
            }
        }

        // Body translation: gravity, contacts, pushes on the lumped mass.
        let push = self.push_force();
        let mut fx = push.0;
        let mut fz = push.1 - self.total_mass * g;
        for leg in 0..2 {
            fx += foot_contact[leg].tangent;
            fz += foot_contact[leg].normal;
        }
        for (_, f) in &collision {
            fx += f.tangent;
            fz += f.normal;
        }
        let (ax, az) = if self.cfg.fixed_base {
            (0.0, 0.0)
        } else {
            (fx / self.total_mass, fz / self.total_mass)
        };

        // Proper vertical acceleration felt by the limbs: zero in free fall,
        // g when supported.
        let g_eff = if self.cfg.fixed_base {
            g
        } else {
            (g + az).clamp(0.0, 2.0 * g)
        };

        // Body rotation about the root: contact torques, COM-offset gravity
        // torque, hip/shoulder motor reactions, angular damping.
        let mut torque_body = 0.0;
        if !self.cfg.fixed_base {
            for leg in 0..2 {
                let tip = kinematics[leg].tip();
                let (rx, rz) = (tip.0 - self.state.x, tip.1 - self.state.z);
                torque_body +=
                    rx * foot_contact[leg].normal - rz * foot_contact[leg].tangent;
            }
            for (point, f) in &collision {
                let (rx, rz) = (point.0 - self.state.x, point.1 - self.state.z);
                torque_body += rx * f.normal - rz * f.tangent;
            }
            // COM offset shifts the gravity line of action off the root.
            let com_dx = self.overrides.com_offset * self.state.pitch.cos();
            torque_body += com_dx * (-self.total_mass * g);
            // Reaction of each limb's root motor on the torso.
            for limb_idx in 0..self.morph.n_limbs() {
                torque_body -= torques[self.morph.limb_joint_offset(limb_idx)];
            }
            torque_body -= self.morph.torso_angular_damping * self.state.pitch_rate;
        }

        // Joint rotational dynamics.
        let mut qdd = vec![0.0; dof];
        {
            let scale = self.overrides.mass_scale;
            for limb_idx in 0..self.morph.n_limbs() {
                let limb = self.morph.limb(limb_idx);
                let offset = self.morph.limb_joint_offset(limb_idx);
                let kin = &kinematics[limb_idx];
                let n = limb.joints.len();
                let is_leg = limb_idx < 2;
                let foot = if is_leg { Some(foot_contact[limb_idx]) } else { None };
                for jj in 0..n {
                    let joint_pos = kin.points[jj];
                    // Exact gravity torque of the distal chain about this joint.
                    let mut tau_grav = 0.0;
                    for kk in jj..n {
                        let m = limb.joints[kk].link_mass * scale;
                        let com_x = kin.points[kk].0 + limb.joints[kk].link_com * kin.link_angles[kk].sin();
                        tau_grav -= m * g_eff * (com_x - joint_pos.0);
                    }
                    // Foot contact mapped through the chain Jacobian.
                    let mut tau_contact = 0.0;
                    if let Some(f) = foot {
                        if f.normal > 0.0 || f.tangent != 0.0 {
                            for kk in jj..n {
                                let (sa, ca) = kin.link_angles[kk].sin_cos();
                                let l = limb.joints[kk].link_length;
                                tau_contact += l * (ca * f.tangent + sa * f.normal);
                            }
                        }
                    }
                    let gi = offset + jj;
                    let friction = if self.state.qd[gi] != 0.0 {
                        -self.overrides.joint_friction * self.state.qd[gi].signum()
                    } else {
                        0.0
                    };
                    let net = torques[gi] + tau_grav + tau_contact + friction
                        - self.overrides.joint_damping * self.state.qd[gi];
                    qdd[gi] = net / self.joint_inertia(gi);
                }
            }
        }

        // Semi-implicit Euler: velocities first, then positions.
        if !self.cfg.fixed_base {
            self.state.vx += ax * dt;
            self.state.vz += az * dt;
            self.state.pitch_rate += torque_body / self.morph.torso_inertia * dt;
            self.state.x += self.state.vx * dt;
            self.state.z += self.state.vz * dt;
            self.state.pitch += self.state.pitch_rate * dt;
        }
        {
            let limits = self.morph.joint_vec(|j| j.angle_limits);
            for i in 0..dof {
                self.state.qd[i] += qdd[i] * dt;
                self.state.q[i] += self.state.qd[i] * dt;
                if self.state.q[i] < limits[i].0 {
                    self.state.q[i] = limits[i].0;
                    if self.state.qd[i] < 0.0 {
                        self.state.qd[i] = 0.0;
                    }
                } else if self.state.q[i] > limits[i].1 {
                    self.state.q[i] = limits[i].1;
                    if self.state.qd[i] > 0.0 {
                        self.state.qd[i] = 0.0;
                    }
                }
            }
        }
        self.state.torques = torques;

        // Air-time accounting and touchdown events, using post-integration
        // foot positions for swing displacement.
        for leg in 0..2 {
            let was = self.state.feet[leg].contact;
            let now = foot_contact[leg].active;
            let tip = self.limb_kinematics(leg).tip();
            let foot = &mut self.state.feet[leg];
            foot.normal_force = foot_contact[leg].normal;
            foot.tangent_force = foot_contact[leg].tangent;
            if now && !was {
                if foot.air_time > 0.0 {
                    self.pending_touchdowns.push(TouchdownEvent {
                        foot: leg,
                        air_time: foot.air_time,
                        dx: (tip.0 - foot.swing_start_x).abs(),
                    });
                }
                foot.air_time = 0.0;
            } else if !now {
                if was {
                    foot.swing_start_x = tip.0;
                }
                foot.air_time += dt;
            }
            foot.contact = now;
        }

        if !self.state.is_finite() {
            return Err(WalkerError::SimulationBlowUp {
                step: self.state.step_count,
                detail: "non-finite state after substep".to_string(),
            });
        }
        Ok(())
    }

    /// Fall detection: torso below 60% of nominal standing height or pitched
    /// past one radian.
    pub fn is_fallen(&self) -> bool {
        self.state.z < 0.6 * self.nominal_height() || self.state.pitch.abs() > 1.0
    }
}

/// PD control law: `clamp(kp (q_target - q) - kd qd, ±tau_max)` per joint.
pub fn pd_torque(
    q: &[f64],
    qd: &[f64],
    q_target: &[f64],
    kp: &[f64],
    kd: &[f64],
    tau_max: &[f64],
) -> Vec<f64> {
    debug_assert!(
        q.len() == qd.len()
            && q.len() == q_target.len()
            && q.len() == kp.len()
            && q.len() == kd.len()
            && q.len() == tau_max.len()
    );
    q.iter()
        .enumerate()
        .map(|(i, &qi)| (kp[i] * (q_target[i] - qi) - kd[i] * qd[i]).clamp(-tau_max[i], tau_max[i]))
        .collect()
}
