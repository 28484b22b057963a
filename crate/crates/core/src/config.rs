//! The run configuration: everything a training or evaluation run needs,
//! serialized as JSON with a schema version and a stable content hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domrand::RandomizationTable;
use crate::env::contact::GroundParams;
use crate::env::morphology::MorphologyConfig;
use crate::error::Result;
use crate::obs::CommandRanges;
use crate::ppo::{Algorithm, TrainMode, TrainerConfig};
use crate::rewards::RewardParams;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub mode: TrainMode,
    pub algorithm: Algorithm,
    /// Morphology preset name ("planar-walker" or "paper-dims").
    pub morphology: String,
    pub trainer: TrainerConfig,
    pub rewards: RewardParams,
    /// Ground-contact constants of the penalty contact model.
    #[serde(default)]
    pub ground: GroundParams,
    pub randomization: RandomizationTable,
    pub commands: CommandRanges,
    /// Additive Gaussian noise std on actor observations.
    pub observation_noise_std: f64,
    pub seed: u64,
    pub output_dir: String,
    /// Checkpoint every this many iterations (0 = final only).
    pub checkpoint_interval: usize,
    /// Episodes per evaluation run.
    pub eval_episodes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            mode: TrainMode::Bipedal,
            algorithm: Algorithm::Mash,
            morphology: "planar-walker".to_string(),
            trainer: TrainerConfig::default(),
            rewards: RewardParams::default(),
            ground: GroundParams::default(),
            randomization: RandomizationTable::default(),
            commands: CommandRanges::default(),
            observation_noise_std: 0.0,
            seed: 0,
            output_dir: "runs/walker".to_string(),
            checkpoint_interval: 100,
            eval_episodes: 50,
        }
    }
}

impl RunConfig {
    pub fn morphology_config(&self) -> Result<MorphologyConfig> {
        MorphologyConfig::preset(&self.morphology)
    }

    pub fn validate(&self) -> Result<()> {
        self.morphology_config()?.validate()?;
        self.randomization.validate()?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON serialization.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    /// Training protocol fields that must match for an A/B comparison:
    /// morphology, rewards, randomization, commands, and budget.
    pub fn protocol_matches(&self, other: &RunConfig) -> bool {
        self.mode == other.mode
            && self.morphology == other.morphology
            && self.rewards == other.rewards
            && self.randomization == other.randomization
            && self.commands == other.commands
            && self.trainer.iterations == other.trainer.iterations
            && self.trainer.n_envs == other.trainer.n_envs
            && self.trainer.episode_len == other.trainer.episode_len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_losslessly() {
        let cfg = RunConfig::default();
        let json = cfg.to_json_pretty();
        let back = RunConfig::from_json(&json).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.content_hash(), back.content_hash());
    }

    #[test]
    fn default_scales_and_ranges_match_the_published_tables() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.rewards.scales.joint_position, 3.5);
        assert_eq!(cfg.rewards.scales.feet_contact_number, 1.2);
        assert_eq!(cfg.randomization.friction_coefficient.low, 0.1);
        assert_eq!(cfg.randomization.friction_coefficient.high, 1.2);
        assert_eq!(cfg.randomization.gravity.low, 9.78);
        assert_eq!(cfg.randomization.gravity.high, 9.83);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let b = RunConfig::default();
        assert_eq!(a.content_hash(), b.content_hash());
        let mut c = RunConfig::default();
        c.seed = 1;
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn protocol_match_ignores_algorithm_but_not_budget() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.algorithm = Algorithm::SingleAgentPpo;
        b.seed = 99;
        assert!(a.protocol_matches(&b));
        b.trainer.iterations = 7;
        assert!(!a.protocol_matches(&b));
    }
}
