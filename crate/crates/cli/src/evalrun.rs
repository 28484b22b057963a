//! Shared evaluation pipeline: run deterministic episodes from a trained
//! policy (or a random baseline), compute the four metrics, and emit
//! artifacts.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use walker_core::checkpoint::load_checkpoint;
use walker_core::config::RunConfig;
use walker_core::env::CommandVector;
use walker_core::metrics::{
    action_smoothness, convergence_time, extract_phase, limb_coordination, torso_stability,
    RewardCurve, StabilityWeights,
};
use walker_core::ppo::{evaluate, EvalPolicy, EvalResult, Trainer};
use walker_core::WalkerError;

use crate::csvio::NumericCsv;

/// Evaluation episode length (control steps): long enough for several gait
/// cycles so phase extraction is meaningful.
pub const EVAL_EPISODE_LEN: usize = 240;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub algorithm: String,
    pub mode: String,
    pub morphology: String,
    pub episodes: usize,
    pub episode_len: usize,
    pub seed: u64,
    /// Convergence time in iterations from the training curve, when found.
    pub t_conv: Option<f64>,
    pub s_action: f64,
    pub s_torso: f64,
    pub c_limb: f64,
    /// True when phase extraction failed (aperiodic gait) and c_limb reports
    /// the worst-case value of pi.
    pub c_limb_fallback: bool,
    pub mean_return: f64,
    pub mean_displacement: f64,
    pub fall_rate: f64,
}

/// Loads a checkpoint into a fresh trainer built from its embedded config.
pub fn trainer_from_checkpoint(ckpt: &Path) -> Result<(Trainer, RunConfig)> {
    let (manifest, tensors) = load_checkpoint(ckpt)
        .with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
    let config = manifest.config.clone();
    let mut trainer = Trainer::from_config(&config)?;
    let layout = trainer.layout_summary();
    if layout != manifest.layout {
        bail!(
            "checkpoint layout mismatch: checkpoint was built for {:?}, \
             this configuration produces {:?}",
            manifest.layout,
            layout
        );
    }
    trainer.restore_tensors(&tensors)?;
    Ok((trainer, config))
}

/// Fixed evaluation command: forward walking at the midpoint of the
/// configured command range.
pub fn eval_command(config: &RunConfig) -> CommandVector {
    CommandVector::forward(0.5 * (config.commands.vx_low + config.commands.vx_high))
}

/// Runs deterministic-policy episodes.
pub fn eval_policy(trainer: &Trainer, config: &RunConfig, episodes: usize, seed: u64) -> Result<EvalResult> {
    let result = evaluate(
        EvalPolicy::Actors(&trainer.actors, &trainer.ctx),
        &trainer.morph,
        trainer.reward_config(),
        episodes,
        EVAL_EPISODE_LEN,
        eval_command(config),
        seed,
    )?;
    Ok(result)
}

/// Computes the four metrics from evaluation traces plus the training curve.
pub fn compute_metrics(
    result: &EvalResult,
    trainer: &Trainer,
    config: &RunConfig,
    train_log: Option<&Path>,
    seed: u64,
) -> Result<MetricsReport> {
    let t_conv = match train_log {
        Some(path) if path.exists() => {
            let csv = NumericCsv::read(path)?;
            let curve = RewardCurve::new(csv.column("mean_reward")?);
            Some(convergence_time(&curve)? as f64)
        }
        _ => None,
    };

    // Action smoothness over every episode, averaged.
    let mut s_action_acc = 0.0;
    let mut s_action_n = 0usize;
    let mut s_torso_acc = 0.0;
    let mut s_torso_n = 0usize;
    for ep in &result.episodes {
        let actions: Vec<Vec<f64>> = ep.snapshots.iter().map(|s| s.action.clone()).collect();
        if actions.len() >= 2 {
            s_action_acc += action_smoothness(&actions)?;
            s_action_n += 1;
        }
        let heights: Vec<f64> = ep.snapshots.iter().map(|s| s.torso_z).collect();
        let orientations: Vec<Vec<f64>> = ep.snapshots.iter().map(|s| vec![s.pitch]).collect();
        if heights.len() >= 2 {
            s_torso_acc += torso_stability(&heights, &orientations, StabilityWeights::default())?;
            s_torso_n += 1;
        }
    }
    let s_action = if s_action_n > 0 { s_action_acc / s_action_n as f64 } else { 0.0 };
    let s_torso = if s_torso_n > 0 { s_torso_acc / s_torso_n as f64 } else { 0.0 };

    // Limb coordination from hip-joint phases; an aperiodic gait reports the
    // worst-case wrapped error.
    let left_hip = 0;
    let right_hip = trainer.morph.leg_dof();
    let phi_target = if eval_command(config).standing { 0.0 } else { std::f64::consts::PI };
    let mut c_acc = 0.0;
    let mut c_n = 0usize;
    let mut fallback = false;
    for ep in &result.episodes {
        let left: Vec<f64> = ep.snapshots.iter().map(|s| s.q[left_hip]).collect();
        let right: Vec<f64> = ep.snapshots.iter().map(|s| s.q[right_hip]).collect();
        match (extract_phase(&left, 1.0 / 60.0), extract_phase(&right, 1.0 / 60.0)) {
            (Ok(pl), Ok(pr)) => {
                let n = pl.len().min(pr.len());
                c_acc += limb_coordination(&pl[..n], &pr[..n], phi_target)?;
                c_n += 1;
            }
            (Err(WalkerError::AperiodicGait { .. }), _)
            | (_, Err(WalkerError::AperiodicGait { .. })) => {
                fallback = true;
            }
            (Err(WalkerError::InsufficientData(_)), _)
            | (_, Err(WalkerError::InsufficientData(_))) => {
                fallback = true;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        }
    }
    let c_limb = if c_n > 0 { c_acc / c_n as f64 } else { std::f64::consts::PI };

    let falls = result.episodes.iter().filter(|e| e.fell).count();
    let tag = |v: serde_json::Value| v.as_str().unwrap_or_default().to_string();
    Ok(MetricsReport {
        algorithm: tag(serde_json::to_value(config.algorithm)?),
        mode: tag(serde_json::to_value(config.mode)?),
        morphology: config.morphology.clone(),
        episodes: result.episodes.len(),
        episode_len: EVAL_EPISODE_LEN,
        seed,
        t_conv,
        s_action,
        s_torso,
        c_limb,
        c_limb_fallback: fallback && c_n == 0,
        mean_return: result.mean_return(),
        mean_displacement: result.mean_displacement(),
        fall_rate: falls as f64 / result.episodes.len().max(1) as f64,
    })
}
