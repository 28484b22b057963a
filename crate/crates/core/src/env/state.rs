//! Simulator state and the per-step snapshot consumed by rewards and
//! observation builders.

use serde::{Deserialize, Serialize};

/// Remote-controller command held constant over an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandVector {
    /// Binary standing flag (1 = hold posture).
    pub standing: bool,
    /// Forward velocity command (m/s).
    pub vx: f64,
    /// Lateral velocity command (m/s); held 0 in planar mode.
    pub vy: f64,
    /// Yaw-rate command (rad/s); held 0 in planar mode.
    pub yaw_rate: f64,
}

impl CommandVector {
    pub fn standing() -> Self {
        Self { standing: true, vx: 0.0, vy: 0.0, yaw_rate: 0.0 }
    }

    pub fn forward(vx: f64) -> Self {
        Self { standing: false, vx, vy: 0.0, yaw_rate: 0.0 }
    }

    /// The four command entries in layout order.
    pub fn as_array(&self) -> [f64; 4] {
        [if self.standing { 1.0 } else { 0.0 }, self.vx, self.vy, self.yaw_rate]
    }
}

/// Per-foot contact bookkeeping.
#[derive(Debug, Clone, Copy, Default)]
pub struct FootState {
    pub contact: bool,
    pub normal_force: f64,
    pub tangent_force: f64,
    /// Seconds spent airborne since last touchdown.
    pub air_time: f64,
    /// Horizontal position at liftoff, for swing-displacement credit.
    pub swing_start_x: f64,
    /// Static-friction anchor while the foot penetrates the ground.
    pub anchor_x: Option<f64>,
}

/// Full simulator state.
#[derive(Debug, Clone)]
pub struct WalkerState {
    /// Torso root position (m) and pitch (rad, CCW-positive in the x-z plane).
    pub x: f64,
    pub z: f64,
    pub pitch: f64,
    pub vx: f64,
    pub vz: f64,
    pub pitch_rate: f64,
    /// Joint angles and velocities in global joint order.
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    /// Last applied torques (N·m).
    pub torques: Vec<f64>,
    pub feet: [FootState; 2],
    /// Simulation time (s).
    pub time: f64,
    /// Control steps taken since reset.
    pub step_count: u64,
}

impl WalkerState {
    pub fn zeroed(dof: usize) -> Self {
        Self {
            x: 0.0,
            z: 0.0,
            pitch: 0.0,
            vx: 0.0,
            vz: 0.0,
            pitch_rate: 0.0,
            q: vec![0.0; dof],
            qd: vec![0.0; dof],
            torques: vec![0.0; dof],
            feet: [FootState::default(); 2],
            time: 0.0,
            step_count: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.z, self.pitch, self.vx, self.vz, self.pitch_rate]
            .iter()
            .all(|v| v.is_finite())
            && self.q.iter().all(|v| v.is_finite())
            && self.qd.iter().all(|v| v.is_finite())
    }
}

/// A completed swing, credited at the touchdown step.
#[derive(Debug, Clone, Copy)]
pub struct TouchdownEvent {
    pub foot: usize,
    /// Air time of the completed swing (s).
    pub air_time: f64,
    /// Horizontal displacement of the foot over the swing (m).
    pub dx: f64,
}

/// Everything the reward and observation modules need from one control step.
#[derive(Debug, Clone)]
pub struct StepSnapshot {
    pub time: f64,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    /// Joint velocities at the end of the previous control step.
    pub prev_qd: Vec<f64>,
    pub torques: Vec<f64>,
    pub prev_torques: Vec<f64>,
    /// Raw policy actions (pre-PD scaling): current and two previous steps.
    /// Warm-up steps repeat the first frame.
    pub action: Vec<f64>,
    pub prev_action: Vec<f64>,
    pub prev_prev_action: Vec<f64>,
    /// PD joint-position targets applied this step.
    pub q_target: Vec<f64>,
    pub torso_x: f64,
    pub torso_z: f64,
    pub pitch: f64,
    pub torso_vx: f64,
    pub torso_vz: f64,
    pub pitch_rate: f64,
    /// Magnitude of the gravity unit vector projected into the torso's
    /// horizontal plane (|sin pitch| in planar mode).
    pub gravity_projection: f64,
    pub foot_heights: [f64; 2],
    /// Foot world velocities (x, z) (m/s).
    pub foot_velocities: [(f64, f64); 2],
    pub foot_contacts: [bool; 2],
    pub foot_air_times: [f64; 2],
    pub touchdowns: Vec<TouchdownEvent>,
    /// Contact force magnitudes on non-foot bodies (torso, knees, arm tips).
    pub collision_forces: Vec<f64>,
    pub commands: CommandVector,
    /// External push force currently active (N), zero when none.
    pub push_force: (f64, f64),
}
