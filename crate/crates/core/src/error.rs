//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WalkerError {
    /// A caller broke a shape or layout contract (dimension mismatch, bad slice).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Invalid or infeasible configuration (morphology, ranges, presets).
    #[error("configuration error: {0}")]
    ConfigError(String),

    /// The simulator produced a non-finite state.
    #[error("simulation blow-up at step {step}: {detail}")]
    SimulationBlowUp { step: u64, detail: String },

    /// A non-finite gradient or loss during optimization.
    #[error("training divergence in {what}")]
    TrainingDivergence { what: String },

    /// Not enough samples to evaluate a metric.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A trajectory has no dominant periodic component.
    #[error("aperiodic gait: no dominant frequency (peak/median power ratio {ratio:.2} < 3)")]
    AperiodicGait { ratio: f64 },

    /// Checkpoint manifest does not match its blob or the active configuration.
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, WalkerError>;

impl WalkerError {
    pub fn contract(msg: impl Into<String>) -> Self {
        WalkerError::ContractViolation(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        WalkerError::ConfigError(msg.into())
    }
}
