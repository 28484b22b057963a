//! Deterministic planar articulated-walker environment.

pub mod contact;
pub mod morphology;
pub mod sim;
pub mod state;

pub use contact::{contact_force, ContactForce, GroundParams};
pub use morphology::{JointConfig, LimbConfig, LimbGroup, MorphologyConfig, Side};
pub use sim::{pd_torque, LimbKinematics, SimConfig, WalkerSim};
pub use state::{CommandVector, FootState, StepSnapshot, TouchdownEvent, WalkerState};
