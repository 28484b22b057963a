//! Run-directory layout, locking, and trajectory/log writers.
//!
//! Layout: `<output_dir>/{config.json, train_log.csv, checkpoints/, eval/}`.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use walker_core::ppo::{EpisodeTrace, IterationStats};
use walker_core::rewards::RewardTerm;

/// Exclusive lock file preventing concurrent runs in one directory.
/// Removed on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(run_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(run_dir)?;
        let path = run_dir.join(".lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!(
                    "run directory {} is locked by another run (remove {} if stale)",
                    run_dir.display(),
                    path.display()
                )
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

pub const TRAIN_LOG_HEADER: &str = "iteration,mean_reward,policy_loss,value_loss,entropy,\
clip_fraction,ratio_mean,ratio_max,explained_variance,wall_clock_s";

/// Streaming train_log.csv writer.
pub struct TrainLog {
    file: File,
}

impl TrainLog {
    pub fn create(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join("train_log.csv");
        let mut file = File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        writeln!(file, "{TRAIN_LOG_HEADER}")?;
        Ok(Self { file })
    }

    pub fn append(&mut self, s: &IterationStats) -> Result<()> {
        writeln!(
            self.file,
            "{},{:.9},{:.9},{:.9},{:.9},{:.6},{:.9},{:.9},{:.9},{:.3}",
            s.iteration,
            s.mean_reward,
            s.update.policy_loss,
            s.update.value_loss,
            s.update.entropy,
            s.update.clip_fraction,
            s.update.ratio_mean,
            s.update.ratio_max,
            s.update.explained_variance,
            s.wall_clock_s
        )?;
        self.file.flush()?;
        Ok(())
    }
}

/// Writes evaluation traces as one CSV: one row per control step with joint
/// state, references, actions, torso pose, contacts, and per-term scaled
/// rewards.
pub fn write_trajectory_csv(path: &Path, episodes: &[EpisodeTrace], dof: usize) -> Result<()> {
    let mut header = String::from("episode,t");
    for i in 0..dof {
        header.push_str(&format!(",q_{i}"));
    }
    for i in 0..dof {
        header.push_str(&format!(",qd_{i}"));
    }
    for i in 0..dof {
        header.push_str(&format!(",qref_{i}"));
    }
    for i in 0..dof {
        header.push_str(&format!(",action_{i}"));
    }
    header.push_str(",torso_x,torso_z,pitch,torso_vx,torso_vz,pitch_rate,contact_left,contact_right");
    for term in RewardTerm::ALL {
        header.push_str(&format!(",rew_{}", term.name()));
    }
    header.push_str(",reward_total");

    let mut out = String::new();
    out.push_str(&header);
    out.push('\n');
    for (ep, trace) in episodes.iter().enumerate() {
        for (t, snap) in trace.snapshots.iter().enumerate() {
            let rewards = &trace.rewards[t];
            let refs = &trace.references[t];
            out.push_str(&format!("{ep},{:.6}", snap.time));
            for v in &snap.q {
                out.push_str(&format!(",{v:.9}"));
            }
            for v in &snap.qd {
                out.push_str(&format!(",{v:.9}"));
            }
            for v in refs {
                out.push_str(&format!(",{v:.9}"));
            }
            for v in &snap.action {
                out.push_str(&format!(",{v:.9}"));
            }
            out.push_str(&format!(
                ",{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{},{}",
                snap.torso_x,
                snap.torso_z,
                snap.pitch,
                snap.torso_vx,
                snap.torso_vz,
                snap.pitch_rate,
                snap.foot_contacts[0] as u8,
                snap.foot_contacts[1] as u8
            ));
            for (_, _, scaled) in rewards.iter() {
                out.push_str(&format!(",{scaled:.9}"));
            }
            out.push_str(&format!(",{:.9}\n", rewards.total));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
