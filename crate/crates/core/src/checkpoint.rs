//! Versioned JSON envelopes for policies and full trainer state.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{EnvConfig, SimConfig};
use crate::error::{Error, Result};
use crate::net::{CriticParams, PolicyParams};

pub const FORMAT: &str = "acemappo-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    payload: T,
}

/// A frozen policy plus the environment it was trained in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub label: String,
    pub episode: usize,
    pub seed: u64,
    pub policy: PolicyParams,
    pub critic: Option<CriticParams>,
    pub sim: SimConfig,
    pub env: EnvConfig,
}

impl PolicyCheckpoint {
    pub const KIND: &'static str = "policy";

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_envelope(path.as_ref(), Self::KIND, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ckpt: Self = read_envelope(path.as_ref(), Self::KIND)?;
        if !ckpt.policy.0.is_consistent() {
            return Err(Error::Checkpoint { path: path.as_ref().into(), message: "policy shape is inconsistent".into() });
        }
        Ok(ckpt)
    }
}

pub fn write_envelope<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<()> {
    let env = Envelope { format: FORMAT.to_string(), version: VERSION, kind: kind.to_string(), payload };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string(&env)?;
    fs::write(path, text).map_err(|e| Error::Checkpoint { path: path.into(), message: e.to_string() })
}

pub fn read_envelope<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let fail = |message: String| Error::Checkpoint { path: PathBuf::from(path), message };
    let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let header: Envelope<serde_json::Value> = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
    if header.format != FORMAT {
        return Err(fail(format!("unknown format {:?}", header.format)));
    }
    if header.version != VERSION {
        return Err(fail(format!("unsupported version {}", header.version)));
    }
    if header.kind != kind {
        return Err(fail(format!("expected a {kind} checkpoint, found {}", header.kind)));
    }
    serde_json::from_value(header.payload).map_err(|e| fail(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn policy_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ckpt = PolicyCheckpoint {
            label: "test".into(),
            episode: 3,
            seed: 1,
            policy: PolicyParams::new(&[16, 16], 0.01, &mut rng),
            critic: Some(CriticParams::new(47, &[8], &mut rng)),
            sim: SimConfig::default(),
            env: EnvConfig::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/p.json");
        ckpt.save(&path).unwrap();
        let back = PolicyCheckpoint::load(&path).unwrap();
        assert_eq!(back, ckpt);
        let bits = |p: &PolicyParams| p.params().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.policy), bits(&ckpt.policy));
    }

    #[test]
    fn rejects_wrong_kind_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        write_envelope(&path, "trainer", &1u32).unwrap();
        assert!(matches!(PolicyCheckpoint::load(&path), Err(Error::Checkpoint { .. })));
        fs::write(&path, "not json").unwrap();
        assert!(PolicyCheckpoint::load(&path).is_err());
        assert!(PolicyCheckpoint::load(dir.path().join("missing.json")).is_err());
    }
}
