//! Self-describing JSON checkpoint of a trained policy.

use std::path::Path;

use gpc_core::envs::{Env, EnvSpec};
use gpc_core::flow::FlowModel;
use gpc_core::gpc::{GpcConfig, IterationStats};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Everything covered by the content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    pub env: String,
    pub env_spec: EnvSpec,
    pub model: FlowModel,
    pub config: GpcConfig,
    pub stats: Vec<IterationStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Seconds since the Unix epoch; excluded from the hash.
    pub created_unix: u64,
    /// Hex SHA-256 of the compact JSON encoding of `payload`.
    pub content_hash: String,
    pub payload: Payload,
}

fn hash(payload: &Payload) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(payload)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Checkpoint {
    pub fn new(env: &Env, model: FlowModel, config: GpcConfig, stats: Vec<IterationStats>) -> Result<Self, CliError> {
        let payload = Payload {
            env: env.kind().name().to_string(),
            env_spec: env.spec.clone(),
            model,
            config,
            stats,
        };
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Self {
            format_version: FORMAT_VERSION,
            created_unix,
            content_hash: hash(&payload)?,
            payload,
        })
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(CliError::Runtime(format!(
                "unsupported checkpoint format_version {} (expected {FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        let actual = hash(&ckpt.payload)?;
        if actual != ckpt.content_hash {
            return Err(CliError::Runtime(format!(
                "checkpoint hash mismatch: recorded {}, computed {actual}",
                ckpt.content_hash
            )));
        }
        let env = ckpt.env()?;
        if env.spec != ckpt.payload.env_spec {
            return Err(CliError::Runtime(format!(
                "checkpoint environment spec differs from the built-in {} spec",
                env.kind()
            )));
        }
        ckpt.payload.model.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read checkpoint {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn env(&self) -> Result<Env, CliError> {
        let kind = self.payload.env.parse().map_err(|e: gpc_core::Error| CliError::Runtime(e.to_string()))?;
        Ok(Env::new(kind))
    }
}
