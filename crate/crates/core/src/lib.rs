//! Planar bipedal walker training stack.
//!
//! A dependency-light pipeline that trains per-limb agents with
//! shared-parameter group actors and a centralized privileged critic, using a
//! clipped multi-agent policy-gradient objective over a deterministic planar
//! articulated-walker simulator. A conventional single-agent baseline shares
//! the same environment, rewards, and randomization for A/B comparison.
//!
//! The numeric kernel in [`math`] is generic over the scalar type (f32/f64);
//! the simulator and training pipeline run in f64.

pub mod checkpoint;
pub mod config;
pub mod domrand;
pub mod env;
pub mod error;
pub mod math;
pub mod metrics;
pub mod obs;
pub mod ppo;
pub mod rewards;
pub mod scalar;

pub use error::{Result, WalkerError};
pub use scalar::Scalar;

/// Scalar type used by the simulator and the training pipeline.
pub type Real = f64;

/// f64 network aliases used throughout training.
pub type Mlp64 = math::Mlp<f64>;
pub type AdamState64 = math::AdamState<f64>;
pub type GaussianHead64 = math::GaussianHead<f64>;

/// f32 network aliases, matching the on-disk checkpoint precision.
pub type Mlp32 = math::Mlp<f32>;
pub type AdamState32 = math::AdamState<f32>;
pub type GaussianHead32 = math::GaussianHead<f32>;
