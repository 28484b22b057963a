//! Checkpoints: a flat little-endian f32 parameter blob plus a JSON manifest
//! listing tensor names, shapes, and byte offsets, the run configuration,
//! and layout fingerprints for mismatch rejection. Files are written to a
//! temporary name and renamed, so partial checkpoints never appear.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Result, WalkerError};
use crate::ppo::AgentRoster;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
    /// Element count.
    pub len: usize,
}

/// Network layout fingerprints checked when a checkpoint is loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSummary {
    pub dof_total: usize,
    pub n_agents: usize,
    pub group_names: Vec<String>,
    pub group_input_widths: Vec<usize>,
    pub group_action_dims: Vec<usize>,
    pub critic_input_width: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub schema_version: u32,
    pub iteration: u64,
    pub config: RunConfig,
    pub config_hash: String,
    pub layout: LayoutSummary,
    pub roster: AgentRoster,
    pub tensors: Vec<TensorEntry>,
    pub blob_sha256: String,
    /// Serialized optimizer-shuffle rng, for reproducible continuation.
    pub rng_state: serde_json::Value,
}

/// A named tensor ready for serialization.
pub struct NamedTensor<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

fn blob_path(base: &Path) -> PathBuf {
    base.with_extension("bin")
}

fn manifest_path(base: &Path) -> PathBuf {
    base.with_extension("json")
}

/// Writes `base.bin` and `base.json` atomically.
#[allow(clippy::too_many_arguments)]
pub fn save_checkpoint(
    base: &Path,
    tensors: &[NamedTensor<'_>],
    iteration: u64,
    config: &RunConfig,
    layout: LayoutSummary,
    roster: AgentRoster,
    rng_state: serde_json::Value,
) -> Result<()> {
    let mut blob: Vec<u8> = Vec::new();
    let mut entries = Vec::with_capacity(tensors.len());
    for t in tensors {
        let expect: usize = t.shape.iter().product();
        if expect != t.data.len() {
            return Err(WalkerError::contract(format!(
                "tensor {} shape {:?} does not cover {} elements",
                t.name,
                t.shape,
                t.data.len()
            )));
        }
        let offset = blob.len();
        for v in t.data {
            blob.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        entries.push(TensorEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            offset,
            len: t.data.len(),
        });
    }
    let blob_sha256: String = Sha256::digest(&blob).iter().map(|b| format!("{b:02x}")).collect();
    let manifest = CheckpointManifest {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        iteration,
        config: config.clone(),
        config_hash: config.content_hash(),
        layout,
        roster,
        tensors: entries,
        blob_sha256,
        rng_state,
    };

    if let Some(dir) = base.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let write_atomic = |path: &Path, bytes: &[u8]| -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    };
    write_atomic(&blob_path(base), &blob)?;
    write_atomic(
        &manifest_path(base),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(())
}

/// Loads a checkpoint given either the `.json`, the `.bin`, or the extension-
/// free base path. Verifies the blob hash and every tensor extent.
pub fn load_checkpoint(path: &Path) -> Result<(CheckpointManifest, HashMap<String, Vec<f64>>)> {
    let base = path.with_extension("");
    let manifest_text = std::fs::read_to_string(manifest_path(&base))?;
    let manifest: CheckpointManifest = serde_json::from_str(&manifest_text)?;
    if manifest.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(WalkerError::CheckpointMismatch(format!(
            "unsupported checkpoint schema {}",
            manifest.schema_version
        )));
    }
    let blob = std::fs::read(blob_path(&base))?;
    let got_hash: String = Sha256::digest(&blob).iter().map(|b| format!("{b:02x}")).collect();
    if got_hash != manifest.blob_sha256 {
        return Err(WalkerError::CheckpointMismatch(
            "parameter blob does not match the manifest hash".to_string(),
        ));
    }
    if manifest.config_hash != manifest.config.content_hash() {
        return Err(WalkerError::CheckpointMismatch(
            "embedded config does not match its recorded hash".to_string(),
        ));
    }
    let mut tensors = HashMap::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        let end = entry.offset + entry.len * 4;
        if end > blob.len() {
            return Err(WalkerError::CheckpointMismatch(format!(
                "tensor {} extends past the blob",
                entry.name
            )));
        }
        let mut data = Vec::with_capacity(entry.len);
        for i in 0..entry.len {
            let o = entry.offset + i * 4;
            let bits = [blob[o], blob[o + 1], blob[o + 2], blob[o + 3]];
            data.push(f32::from_le_bytes(bits) as f64);
        }
        tensors.insert(entry.name.clone(), data);
    }
    Ok((manifest, tensors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::TrainMode;

    fn roster() -> AgentRoster {
        AgentRoster::mash(
            TrainMode::Bipedal,
            crate::ppo::ActorMode::GroupConcat,
            &crate::env::MorphologyConfig::planar_walker(),
        )
        .unwrap()
    }

    fn layout() -> LayoutSummary {
        LayoutSummary {
            dof_total: 10,
            n_agents: 2,
            group_names: vec!["legs".to_string()],
            group_input_widths: vec![46],
            group_action_dims: vec![6],
            critic_input_width: 66,
        }
    }

    #[test]
    fn checkpoint_round_trips_tensors() {
        let dir = std::env::temp_dir().join("walker_ckpt_test_roundtrip");
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let base = dir.join("ckpt_final");

        let w = vec![0.5_f64, -1.25, 3.0, 0.125];
        let b = vec![0.75_f64, -0.5];
        let tensors = vec![
            NamedTensor { name: "net.w".to_string(), shape: vec![2, 2], data: &w },
            NamedTensor { name: "net.b".to_string(), shape: vec![2], data: &b },
        ];
        let cfg = RunConfig::default();
        save_checkpoint(&base, &tensors, 7, &cfg, layout(), roster(), serde_json::Value::Null).unwrap();

        let (manifest, loaded) = load_checkpoint(&base.with_extension("json")).unwrap();
        assert_eq!(manifest.iteration, 7);
        assert_eq!(manifest.config_hash, cfg.content_hash());
        // Values chosen exactly representable in f32.
        assert_eq!(loaded["net.w"], w);
        assert_eq!(loaded["net.b"], b);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn corrupted_blob_is_rejected() {
        let dir = std::env::temp_dir().join("walker_ckpt_test_corrupt");
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let base = dir.join("ckpt");
        let w = vec![1.0_f64; 3];
        let tensors =
            vec![NamedTensor { name: "w".to_string(), shape: vec![3], data: &w }];
        let cfg = RunConfig::default();
        save_checkpoint(&base, &tensors, 0, &cfg, layout(), roster(), serde_json::Value::Null).unwrap();

        let blob = base.with_extension("bin");
        let mut bytes = std::fs::read(&blob).unwrap();
        bytes[0] ^= 0xff;
        std::fs::write(&blob, bytes).unwrap();
        match load_checkpoint(&base) {
            Err(WalkerError::CheckpointMismatch(_)) => {}
            other => panic!("expected mismatch, got {other:?}"),
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn offsets_are_contiguous_little_endian() {
        let dir = std::env::temp_dir().join("walker_ckpt_test_offsets");
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let base = dir.join("ckpt");
        let a = vec![1.0_f64, 2.0];
        let b = vec![3.0_f64];
        let tensors = vec![
            NamedTensor { name: "a".to_string(), shape: vec![2], data: &a },
            NamedTensor { name: "b".to_string(), shape: vec![1], data: &b },
        ];
        let cfg = RunConfig::default();
        save_checkpoint(&base, &tensors, 0, &cfg, layout(), roster(), serde_json::Value::Null).unwrap();
        let (manifest, _) = load_checkpoint(&base).unwrap();
        assert_eq!(manifest.tensors[0].offset, 0);
        assert_eq!(manifest.tensors[1].offset, 8);
        let blob = std::fs::read(base.with_extension("bin")).unwrap();
        assert_eq!(&blob[8..12], &3.0_f32.to_le_bytes());
        let _ = std::fs::remove_dir_all(&dir);
    }
}
