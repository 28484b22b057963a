//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use walker_core::checkpoint::{save_checkpoint, NamedTensor};
use walker_core::config::RunConfig;
use walker_core::ppo::Trainer;

use crate::evalrun::{
    compute_metrics, eval_policy, trainer_from_checkpoint, MetricsReport,
};
use crate::plot::plot_inputs;
use crate::rundir::{write_trajectory_csv, RunLock, TrainLog};

/// Emits a default run configuration. Refuses to overwrite without `force`.
pub fn cmd_config_init(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!(
            "{} already exists; pass --force to overwrite",
            path.display()
        );
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, RunConfig::default().to_json_pretty())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn save_trainer_checkpoint(trainer: &Trainer, config: &RunConfig, base: &Path) -> Result<()> {
    let tensors = trainer.checkpoint_tensors();
    let named: Vec<NamedTensor<'_>> = tensors
        .iter()
        .map(|(name, shape, data)| NamedTensor {
            name: name.clone(),
            shape: shape.clone(),
            data,
        })
        .collect();
    save_checkpoint(
        base,
        &named,
        trainer.iteration() as u64,
        config,
        trainer.layout_summary(),
        trainer.roster().clone(),
        trainer.rng_state_json(),
    )?;
    Ok(())
}

/// Trains per the configuration; writes `config.json`, `train_log.csv`, and
/// periodic plus final checkpoints under the run directory.
pub fn cmd_train(config_path: &Path, seed: Option<u64>, deterministic: bool) -> Result<PathBuf> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;

    let run_dir = PathBuf::from(&config.output_dir);
    let _lock = RunLock::acquire(&run_dir)?;
    std::fs::write(run_dir.join("config.json"), config.to_json_pretty())?;
    std::fs::create_dir_all(run_dir.join("checkpoints"))?;

    let mut trainer = Trainer::from_config(&config)?;
    trainer.deterministic = deterministic;
    let mut log = TrainLog::create(&run_dir)?;

    let ckpt_dir = run_dir.join("checkpoints");
    let mut result = Ok(());
    for i in 0..config.trainer.iterations {
        match trainer.iterate() {
            Ok(stats) => {
                log.append(&stats)?;
                if config.checkpoint_interval > 0
                    && (i + 1) % config.checkpoint_interval == 0
                    && i + 1 < config.trainer.iterations
                {
                    save_trainer_checkpoint(
                        &trainer,
                        &config,
                        &ckpt_dir.join(format!("ckpt_{:06}", i + 1)),
                    )?;
                }
                if (i + 1) % 20 == 0 || i + 1 == config.trainer.iterations {
                    println!(
                        "iter {:5}/{} reward {:+.3} policy {:+.4} value {:.4} clip {:.3}",
                        i + 1,
                        config.trainer.iterations,
                        stats.mean_reward,
                        stats.update.policy_loss,
                        stats.update.value_loss,
                        stats.update.clip_fraction
                    );
                }
            }
            Err(e) => {
                // Keep the last good checkpoint and surface the failure.
                result = Err(e);
                break;
            }
        }
    }
    save_trainer_checkpoint(&trainer, &config, &ckpt_dir.join("ckpt_final"))?;
    match result {
        Ok(()) => {
            println!("run complete: {}", run_dir.display());
            Ok(run_dir)
        }
        Err(e) => Err(anyhow::Error::from(e).context("training diverged; last checkpoint retained")),
    }
}

/// Evaluates a checkpoint: deterministic-policy episodes, the four metrics,
/// and trajectory dumps for tracking plots.
pub fn cmd_eval(
    ckpt: &Path,
    episodes: usize,
    seed: u64,
    out_dir: Option<&Path>,
    config_override: Option<&Path>,
) -> Result<MetricsReport> {
    let (trainer, config) = trainer_from_checkpoint(ckpt)?;
    if let Some(path) = config_override {
        let other = RunConfig::from_json(&std::fs::read_to_string(path)?)?;
        if other.morphology != config.morphology || other.mode != config.mode {
            bail!(
                "checkpoint was trained on morphology '{}' mode {:?}; \
                 the supplied config wants '{}' {:?}",
                config.morphology,
                config.mode,
                other.morphology,
                other.mode
            );
        }
    }

    let out = match out_dir {
        Some(d) => d.to_path_buf(),
        None => ckpt
            .parent()
            .and_then(Path::parent)
            .map(|run| run.join("eval"))
            .unwrap_or_else(|| PathBuf::from("eval")),
    };
    std::fs::create_dir_all(&out)?;

    let result = eval_policy(&trainer, &config, episodes, seed)?;
    let train_log = ckpt
        .parent()
        .and_then(Path::parent)
        .map(|run| run.join("train_log.csv"));
    let report = compute_metrics(&result, &trainer, &config, train_log.as_deref(), seed)?;

    write_trajectory_csv(
        &out.join("trajectory.csv"),
        &result.episodes,
        trainer.morph.dof_total(),
    )?;
    std::fs::write(
        out.join("metrics.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "evaluated {} episodes: S_action {:.4} S_torso {:.6} C_limb {:.3} displacement {:+.3} m",
        report.episodes, report.s_action, report.s_torso, report.c_limb, report.mean_displacement
    );
    println!("wrote {}", out.join("metrics.json").display());
    Ok(report)
}

/// Trains and evaluates two configurations across a seed list and emits a
/// per-metric comparison table (lower is better on every metric).
pub fn cmd_compare(
    config_a: &Path,
    config_b: &Path,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<PathBuf> {
    let a = RunConfig::from_json(&std::fs::read_to_string(config_a)?)?;
    let b = RunConfig::from_json(&std::fs::read_to_string(config_b)?)?;
    if !a.protocol_matches(&b) {
        bail!(
            "configurations disagree on the comparison protocol \
             (morphology, rewards, randomization, commands, or budget)"
        );
    }
    std::fs::create_dir_all(out_dir)?;

    let mut rows: Vec<(String, Vec<MetricsReport>)> = Vec::new();
    for (label, base) in [("a", &a), ("b", &b)] {
        let mut reports = Vec::new();
        for &seed in seeds {
            let mut config = base.clone();
            config.seed = seed;
            config.output_dir = out_dir
                .join(format!("{label}_seed{seed}"))
                .to_string_lossy()
                .to_string();
            let cfg_path = out_dir.join(format!("{label}_seed{seed}.json"));
            std::fs::write(&cfg_path, config.to_json_pretty())?;
            println!(
                "[compare] training {label} ({:?}) seed {seed}",
                config.algorithm
            );
            let run_dir = cmd_train(&cfg_path, None, false)?;
            let ckpt = run_dir.join("checkpoints/ckpt_final");
            let report = cmd_eval(
                &ckpt.with_extension("json"),
                base.eval_episodes,
                seed,
                Some(&run_dir.join("eval")),
                None,
            )?;
            reports.push(report);
        }
        let name = serde_json::to_value(base.algorithm)?
            .as_str()
            .unwrap_or("unknown")
            .to_string();
        rows.push((name, reports));
    }

    let mean =
        |rs: &[MetricsReport], f: &dyn Fn(&MetricsReport) -> f64| -> f64 {
            rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64
        };
    let t_conv = |r: &MetricsReport| r.t_conv.unwrap_or(f64::NAN);
    let metrics: [(&str, Box<dyn Fn(&MetricsReport) -> f64>); 4] = [
        ("T_Conv", Box::new(t_conv)),
        ("S_action", Box::new(|r: &MetricsReport| r.s_action)),
        ("S_torso", Box::new(|r: &MetricsReport| r.s_torso)),
        ("C_limb", Box::new(|r: &MetricsReport| r.c_limb)),
    ];

    let mut md = String::new();
    md.push_str("# Evaluation metrics comparison\n\n");
    md.push_str(&format!(
        "Seeds: {:?}. Lower is better on every metric; the better method is bold.\n\n",
        seeds
    ));
    md.push_str("| Method | T_Conv | S_action | S_torso | C_limb |\n");
    md.push_str("|---|---|---|---|---|\n");
    let mut means: Vec<Vec<f64>> = Vec::new();
    for (_, reports) in &rows {
        means.push(metrics.iter().map(|(_, f)| mean(reports, f)).collect());
    }
    for (i, (name, _)) in rows.iter().enumerate() {
        md.push_str(&format!("| {name} |"));
        for (m, _) in means[0].iter().enumerate() {
            let v = means[i][m];
            let other = means[1 - i][m];
            let best = v.is_finite() && (!other.is_finite() || v <= other);
            let cell = if v.is_finite() { format!("{v:.4}") } else { "n/a".to_string() };
            if best {
                md.push_str(&format!(" **{cell}** |"));
            } else {
                md.push_str(&format!(" {cell} |"));
            }
        }
        md.push('\n');
    }
    md.push_str("\nPer-seed reports are stored next to each run directory.\n");

    let table_path = out_dir.join("comparison.md");
    std::fs::write(&table_path, &md)?;
    let json: Vec<serde_json::Value> = rows
        .iter()
        .map(|(name, reports)| {
            serde_json::json!({ "method": name, "reports": reports })
        })
        .collect();
    std::fs::write(
        out_dir.join("comparison.json"),
        serde_json::to_string_pretty(&json)?,
    )?;
    println!("{md}");
    println!("wrote {}", table_path.display());
    Ok(table_path)
}

/// Plots training logs or trajectory dumps as a self-contained SVG.
pub fn cmd_plot(inputs: &[PathBuf], out: &Path) -> Result<()> {
    plot_inputs(inputs, out)?;
    println!("wrote {}", out.display());
    Ok(())
}
