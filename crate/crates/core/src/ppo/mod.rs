//! Cooperative multi-agent PPO: rollout collection, generalized advantage
//! estimation, the clipped multi-agent objective, the multi-head centralized
//! critic, and the single-agent baseline.

pub mod buffer;
pub mod eval;
pub mod gae;
pub mod policy;
pub mod roster;
pub mod trainer;
pub mod update;

pub use buffer::RolloutBuffer;
pub use eval::{evaluate, EpisodeTrace, EvalPolicy, EvalResult};
pub use gae::{compute_gae, normalize_advantages};
pub use policy::{GaussianPolicy, PolicyGrads};
pub use roster::{ActorMode, AgentRoster, Algorithm, GroupSpec, TrainMode};
pub use trainer::{IterationStats, Trainer, TrainerConfig};
pub use update::{
    batch_gradients, clipped_surrogate, mappo_update, single_agent_update, BatchAccum,
    UpdateConfig, UpdateContext, UpdateStats,
};
