//! Walker morphology: limb chains, physical parameters, and presets.
//!
//! The sagittal-plane convention used everywhere: x forward, z up, rotations
//! counterclockwise-positive. A link's absolute angle is measured from the
//! downward vertical, so a chain with all joint angles zero hangs straight
//! down along the torso axis.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkerError};

/// One actuated joint and the link it drives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointConfig {
    /// Link length from this joint to the next (m).
    pub link_length: f64,
    /// Link mass (kg).
    pub link_mass: f64,
    /// Distance from the joint to the link's center of mass (m).
    pub link_com: f64,
    /// Joint angle limits (rad), low then high.
    pub angle_limits: (f64, f64),
    /// Motor torque limit (N·m), symmetric.
    pub torque_limit: f64,
    /// PD proportional gain (N·m/rad).
    pub kp: f64,
    /// PD derivative gain (N·m·s/rad).
    pub kd: f64,
    /// Default posture angle (rad).
    pub q_default: f64,
    /// Gait reference amplitude (rad) multiplying the limb's temporal director.
    pub gait_amplitude: f64,
}

/// Which agent group a limb belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimbGroup {
    Legs,
    Arms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

/// A serial chain of joints attached to the torso.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimbConfig {
    pub joints: Vec<JointConfig>,
    /// Attachment point in the torso frame (m), relative to the torso root.
    pub attach_offset: (f64, f64),
    /// Phase offset of this limb's temporal director (cycles).
    pub phase_offset: f64,
}

impl LimbConfig {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }
}

/// The walker's limb/DoF layout and physical parameters; source of all
/// dimension contracts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorphologyConfig {
    pub name: String,
    /// Exactly two legs: left then right.
    pub legs: Vec<LimbConfig>,
    /// Zero or two arms: left then right.
    pub arms: Vec<LimbConfig>,
    pub torso_mass: f64,
    /// Torso rotational inertia about the root (kg·m²).
    pub torso_inertia: f64,
    /// Torso angular damping (N·m·s).
    pub torso_angular_damping: f64,
    /// Gait-cycle scale k (1/s) of the temporal director.
    pub gait_rate: f64,
    /// Policy actions are target joint offsets scaled by this constant (rad).
    pub action_scale: f64,
}

impl MorphologyConfig {
    /// Desk-scale training preset: 3 DoF per leg, 2 DoF per arm, 10 DoF total.
    pub fn planar_walker() -> Self {
        let leg = |phase: f64| LimbConfig {
            joints: vec![
                JointConfig {
                    link_length: 0.40,
                    link_mass: 1.5,
                    link_com: 0.20,
                    angle_limits: (-1.2, 1.2),
                    torque_limit: 60.0,
                    kp: 90.0,
                    kd: 3.0,
                    q_default: 0.0,
                    gait_amplitude: 0.30,
                },
                JointConfig {
                    link_length: 0.40,
                    link_mass: 1.2,
                    link_com: 0.20,
                    angle_limits: (-2.0, 0.05),
                    torque_limit: 60.0,
                    kp: 90.0,
                    kd: 3.0,
                    q_default: 0.0,
                    gait_amplitude: -0.30,
                },
                JointConfig {
                    link_length: 0.12,
                    link_mass: 0.3,
                    link_com: 0.06,
                    angle_limits: (-0.8, 0.8),
                    torque_limit: 30.0,
                    kp: 40.0,
                    kd: 1.5,
                    q_default: 0.0,
                    gait_amplitude: 0.10,
                },
            ],
            attach_offset: (0.0, -0.15),
            phase_offset: phase,
        };
        let arm = |phase: f64| LimbConfig {
            joints: vec![
                JointConfig {
                    link_length: 0.25,
                    link_mass: 0.6,
                    link_com: 0.125,
                    angle_limits: (-1.5, 1.5),
                    torque_limit: 20.0,
                    kp: 30.0,
                    kd: 1.0,
                    q_default: 0.0,
                    gait_amplitude: 0.25,
                },
                JointConfig {
                    link_length: 0.22,
                    link_mass: 0.4,
                    link_com: 0.11,
                    angle_limits: (-0.05, 2.0),
                    torque_limit: 15.0,
                    kp: 20.0,
                    kd: 0.8,
                    q_default: 0.0,
                    gait_amplitude: 0.15,
                },
            ],
            attach_offset: (0.0, 0.25),
            phase_offset: phase,
        };
        Self {
            name: "planar-walker".to_string(),
            // Antiphase legs; each arm swings opposite its same-side leg.
            legs: vec![leg(0.0), leg(0.5)],
            arms: vec![arm(0.5), arm(0.0)],
            torso_mass: 14.0,
            torso_inertia: 2.5,
            torso_angular_damping: 2.0,
            gait_rate: 1.5,
            action_scale: 0.25,
        }
    }

    /// Dimension-contract preset: 6 DoF per leg, 4 DoF per arm, 20 DoF total.
    /// Used to assert observation/action arithmetic, not for training.
    pub fn paper_dims() -> Self {
        let joint = |len: f64, mass: f64| JointConfig {
            link_length: len,
            link_mass: mass,
            link_com: len / 2.0,
            angle_limits: (-1.5, 1.5),
            torque_limit: 40.0,
            kp: 60.0,
            kd: 2.0,
            q_default: 0.0,
            gait_amplitude: 0.2,
        };
        let leg = |phase: f64| LimbConfig {
            joints: (0..6).map(|_| joint(0.15, 0.5)).collect(),
            attach_offset: (0.0, -0.15),
            phase_offset: phase,
        };
        let arm = |phase: f64| LimbConfig {
            joints: (0..4).map(|_| joint(0.12, 0.3)).collect(),
            attach_offset: (0.0, 0.25),
            phase_offset: phase,
        };
        Self {
            name: "paper-dims".to_string(),
            legs: vec![leg(0.0), leg(0.5)],
            arms: vec![arm(0.5), arm(0.0)],
            torso_mass: 20.0,
            torso_inertia: 1.5,
            torso_angular_damping: 1.0,
            gait_rate: 1.5,
            action_scale: 0.25,
        }
    }

    /// Resolves a preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "planar-walker" => Ok(Self::planar_walker()),
            "paper-dims" => Ok(Self::paper_dims()),
            other => Err(WalkerError::config(format!(
                "unknown morphology preset '{other}' (available: planar-walker, paper-dims)"
            ))),
        }
    }

    /// All limbs in global joint order: legs (left, right) then arms.
    pub fn limbs(&self) -> impl Iterator<Item = &LimbConfig> {
        self.legs.iter().chain(self.arms.iter())
    }

    pub fn n_limbs(&self) -> usize {
        self.legs.len() + self.arms.len()
    }

    pub fn dof_total(&self) -> usize {
        self.limbs().map(LimbConfig::dof).sum()
    }

    pub fn leg_dof(&self) -> usize {
        self.legs[0].dof()
    }

    pub fn arm_dof(&self) -> usize {
        self.arms.first().map_or(0, LimbConfig::dof)
    }

    pub fn has_arms(&self) -> bool {
        !self.arms.is_empty()
    }

    /// Global joint index of a limb's first joint.
    pub fn limb_joint_offset(&self, limb: usize) -> usize {
        self.limbs().take(limb).map(LimbConfig::dof).sum()
    }

    pub fn limb(&self, idx: usize) -> &LimbConfig {
        if idx < self.legs.len() {
            &self.legs[idx]
        } else {
            &self.arms[idx - self.legs.len()]
        }
    }

    /// Phase offsets for the two legs (cycles).
    pub fn leg_phases(&self) -> [f64; 2] {
        [self.legs[0].phase_offset, self.legs[1].phase_offset]
    }

    /// Per-joint vectors over all DoF in global order.
    pub fn joint_vec<T: Copy>(&self, f: impl Fn(&JointConfig) -> T) -> Vec<T> {
        self.limbs().flat_map(|l| l.joints.iter().map(&f)).collect()
    }

    pub fn q_default(&self) -> Vec<f64> {
        self.joint_vec(|j| j.q_default)
    }

    pub fn torque_limits(&self) -> Vec<f64> {
        self.joint_vec(|j| j.torque_limit)
    }

    /// Total body mass: torso plus every link (kg).
    pub fn total_mass(&self) -> f64 {
        self.torso_mass + self.limbs().flat_map(|l| &l.joints).map(|j| j.link_mass).sum::<f64>()
    }

    /// Root height above ground when standing at the default posture with
    /// zero pitch: the leg chain's vertical extent plus the hip drop.
    pub fn standing_height(&self) -> f64 {
        let leg = &self.legs[0];
        let mut alpha = 0.0;
        let mut drop = -leg.attach_offset.1;
        for j in &leg.joints {
            alpha += j.q_default;
            drop += j.link_length * alpha.cos();
        }
        drop
    }

    pub fn validate(&self) -> Result<()> {
        if self.legs.len() != 2 {
            return Err(WalkerError::config(format!(
                "morphology must have exactly 2 legs, got {}",
                self.legs.len()
            )));
        }
        if !(self.arms.is_empty() || self.arms.len() == 2) {
            return Err(WalkerError::config(format!(
                "morphology must have 0 or 2 arms, got {}",
                self.arms.len()
            )));
        }
        for limb in self.limbs() {
            if limb.joints.is_empty() {
                return Err(WalkerError::config("limb with zero DoF".to_string()));
            }
            for j in &limb.joints {
                if j.torque_limit <= 0.0 {
                    return Err(WalkerError::config("torque limit must be > 0".to_string()));
                }
                if j.kp < 0.0 || j.kd < 0.0 {
                    return Err(WalkerError::config("PD gains must be >= 0".to_string()));
                }
                if j.angle_limits.0 > j.angle_limits.1 {
                    return Err(WalkerError::config("joint limits inverted".to_string()));
                }
                if j.q_default < j.angle_limits.0 || j.q_default > j.angle_limits.1 {
                    return Err(WalkerError::config(
                        "default posture outside joint limits".to_string(),
                    ));
                }
            }
        }
        if self.standing_height() <= 0.05 {
            return Err(WalkerError::config(
                "infeasible morphology: foot at or below ground at default posture".to_string(),
            ));
        }
        if self.gait_rate <= 0.0 {
            return Err(WalkerError::config("gait rate must be > 0".to_string()));
        }
        Ok(())
    }
}
