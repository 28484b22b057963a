//! Domain randomization: physical parameters sampled at environment
//! initialization and per-step perturbations sampled during rollout. The
//! critic sees the sampled truth through its privileged observation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkerError};

/// A uniform sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub low: f64,
    pub high: f64,
}

impl UniformRange {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.low == self.high {
            return self.low;
        }
        rng.random_range(self.low..self.high)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.low && v <= self.high
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }
}

/// Uniform ranges for every randomized physical parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizationTable {
    pub friction_coefficient: UniformRange,
    pub link_mass_scale: UniformRange,
    /// Center-of-mass offset along the torso x axis (m).
    pub com_offset: UniformRange,
    /// Motor delay (ms), quantized to whole control steps when applied.
    pub motor_delay_ms: UniformRange,
    /// External push force (N), horizontal in planar mode.
    pub push_force: UniformRange,
    pub gravity: UniformRange,
    pub joint_damping: UniformRange,
    pub joint_friction: UniformRange,
    pub joint_armature: UniformRange,
    pub kp_scale: UniformRange,
    pub kd_scale: UniformRange,
    /// Per-step probability of starting a push.
    pub push_probability: f64,
    /// Push duration (s).
    pub push_duration: f64,
    /// Torque noise std as a fraction of each joint's torque limit.
    pub torque_noise_frac: f64,
    /// Forces at least one whole control step of action delay, making the
    /// sub-step millisecond range testable at the 60 Hz control rate.
    pub delay_stress: bool,
}

impl Default for RandomizationTable {
    fn default() -> Self {
        Self {
            friction_coefficient: UniformRange::new(0.1, 1.2),
            link_mass_scale: UniformRange::new(0.9, 1.13),
            com_offset: UniformRange::new(-0.03, 0.03),
            motor_delay_ms: UniformRange::new(0.0, 3.0),
            push_force: UniformRange::new(-20.0, 20.0),
            gravity: UniformRange::new(9.78, 9.83),
            joint_damping: UniformRange::new(0.0, 0.05),
            joint_friction: UniformRange::new(0.0, 0.05),
            joint_armature: UniformRange::new(0.005, 0.015),
            kp_scale: UniformRange::new(0.95, 1.05),
            kd_scale: UniformRange::new(0.95, 1.05),
            push_probability: 1.0 / 150.0,
            push_duration: 0.2,
            torque_noise_frac: 0.02,
            delay_stress: false,
        }
    }
}

impl RandomizationTable {
    /// A table that samples the nominal overrides with certainty and disables
    /// every per-step perturbation.
    pub fn disabled() -> Self {
        let nominal = PhysicsOverrides::nominal();
        let fixed = |v: f64| UniformRange::new(v, v);
        Self {
            friction_coefficient: fixed(nominal.friction),
            link_mass_scale: fixed(nominal.mass_scale),
            com_offset: fixed(nominal.com_offset),
            motor_delay_ms: fixed(0.0),
            push_force: fixed(0.0),
            gravity: fixed(nominal.gravity),
            joint_damping: fixed(nominal.joint_damping),
            joint_friction: fixed(nominal.joint_friction),
            joint_armature: fixed(nominal.joint_armature),
            kp_scale: fixed(1.0),
            kd_scale: fixed(1.0),
            push_probability: 0.0,
            push_duration: 0.2,
            torque_noise_frac: 0.0,
            delay_stress: false,
        }
    }

    /// Named init-time and step-time ranges, for containment checks.
    pub fn entries(&self) -> Vec<(&'static str, UniformRange)> {
        vec![
            ("friction_coefficient", self.friction_coefficient),
            ("link_mass_scale", self.link_mass_scale),
            ("com_offset", self.com_offset),
            ("motor_delay_ms", self.motor_delay_ms),
            ("push_force", self.push_force),
            ("gravity", self.gravity),
            ("joint_damping", self.joint_damping),
            ("joint_friction", self.joint_friction),
            ("joint_armature", self.joint_armature),
            ("kp_scale", self.kp_scale),
            ("kd_scale", self.kd_scale),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, range) in self.entries() {
            if range.low > range.high {
                return Err(WalkerError::config(format!(
                    "randomization range {name} has low > high"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.push_probability) {
            return Err(WalkerError::config("push probability outside [0, 1]".to_string()));
        }
        Ok(())
    }
}

/// Concrete init-time draws for one environment instance. These stay constant
/// within an episode; the critic observes them directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsOverrides {
    pub friction: f64,
    pub mass_scale: f64,
    pub com_offset: f64,
    pub gravity: f64,
    pub joint_damping: f64,
    pub joint_friction: f64,
    pub joint_armature: f64,
    pub kp_scale: f64,
    pub kd_scale: f64,
}

impl PhysicsOverrides {
    /// The unrandomized preset: scale factors at 1, offsets at 0.
    pub fn nominal() -> Self {
        Self {
            friction: 0.8,
            mass_scale: 1.0,
            com_offset: 0.0,
            gravity: 9.81,
            joint_damping: 0.02,
            joint_friction: 0.0,
            joint_armature: 0.01,
            kp_scale: 1.0,
            kd_scale: 1.0,
        }
    }
}

impl Default for PhysicsOverrides {
    fn default() -> Self {
        Self::nominal()
    }
}

/// One uniform draw per init-time parameter.
pub fn sample_init_randomization<R: Rng>(table: &RandomizationTable, rng: &mut R) -> PhysicsOverrides {
    PhysicsOverrides {
        friction: table.friction_coefficient.sample(rng),
        mass_scale: table.link_mass_scale.sample(rng),
        com_offset: table.com_offset.sample(rng),
        gravity: table.gravity.sample(rng),
        joint_damping: table.joint_damping.sample(rng),
        joint_friction: table.joint_friction.sample(rng),
        joint_armature: table.joint_armature.sample(rng),
        kp_scale: table.kp_scale.sample(rng),
        kd_scale: table.kd_scale.sample(rng),
    }
}

/// An external push request produced by the step sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushEvent {
    /// Horizontal force (N); the planar vertical component is zero.
    pub force_x: f64,
    pub duration: f64,
}

/// Per-control-step perturbations.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPerturbation {
    /// Action delay in whole control steps.
    pub delay_steps: usize,
    /// Additive torque noise per joint (N·m).
    pub torque_noise: Vec<f64>,
    pub push: Option<PushEvent>,
}

impl StepPerturbation {
    pub fn none(dof: usize) -> Self {
        Self {
            delay_steps: 0,
            torque_noise: vec![0.0; dof],
            push: None,
        }
    }
}

/// Samples action delay, torque noise, and push events for one control step.
///
/// The motor-delay draw (ms) is quantized to whole control steps; the
/// `delay_stress` flag widens it to at least one step.
pub fn sample_step_randomization<R: Rng>(
    table: &RandomizationTable,
    rng: &mut R,
    control_dt: f64,
    torque_limits: &[f64],
) -> StepPerturbation {
    let delay_ms = table.motor_delay_ms.sample(rng);
    let mut delay_steps = (delay_ms / 1000.0 / control_dt).round() as usize;
    if table.delay_stress {
        delay_steps = delay_steps.max(1);
    }
    let torque_noise = if table.torque_noise_frac > 0.0 {
        torque_limits
            .iter()
            .map(|&tl| table.torque_noise_frac * tl * rng.sample::<f64, _>(StandardNormal))
            .collect()
    } else {
        vec![0.0; torque_limits.len()]
    };
    let push = if table.push_probability > 0.0 && rng.random::<f64>() < table.push_probability {
        Some(PushEvent {
            force_x: table.push_force.sample(rng),
            duration: table.push_duration,
        })
    } else {
        None
    };
    StepPerturbation {
        delay_steps,
        torque_noise,
        push,
    }
}
