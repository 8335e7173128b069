use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::arch::Architecture;
use super::net::PolicyNet;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "schedlab-policy/1";

/// Self-describing policy checkpoint: architecture, raw parameter values, a
/// content hash and a free-form config echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub architecture: Architecture,
    pub layer_params: Vec<usize>,
    pub values: Vec<f64>,
    pub sha256: String,
    #[serde(default)]
    pub config: serde_json::Value,
}

/// SHA-256 over the architecture JSON followed by the little-endian bytes of
/// every parameter.
pub fn content_hash(net: &PolicyNet) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&net.arch).expect("architecture serializes"));
    for v in &net.params {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

impl Checkpoint {
    pub fn from_net(net: &PolicyNet, config: serde_json::Value) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            architecture: net.arch.clone(),
            layer_params: net.arch.layer_param_counts(),
            values: net.params.clone(),
            sha256: content_hash(net),
            config,
        }
    }

    pub fn into_net(self) -> Result<PolicyNet> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format '{}'", self.format)));
        }
        if self.layer_params != self.architecture.layer_param_counts() {
            return Err(Error::Checkpoint("layer parameter counts disagree with architecture".into()));
        }
        let net = PolicyNet::from_params(self.architecture, self.values)?;
        let hash = content_hash(&net);
        if hash != self.sha256 {
            return Err(Error::Checkpoint(format!(
                "content hash mismatch: stored {}, computed {hash}",
                self.sha256
            )));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

pub fn save_policy(net: &PolicyNet, config: serde_json::Value, path: &Path) -> Result<String> {
    let ckpt = Checkpoint::from_net(net, config);
    ckpt.save(path)?;
    Ok(ckpt.sha256)
}

pub fn load_policy(path: &Path) -> Result<PolicyNet> {
    Checkpoint::load(path)?.into_net()
}
