//! JSON checkpoints: the config that produced a run plus its trained networks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use empl_core::nn::{Network, NnError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ExperimentConfig, ExperimentKind};

pub const CHECKPOINT_FORMAT: &str = "empl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot read checkpoint {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("checkpoint is not valid: {0}")]
    Malformed(String),
    #[error("not a checkpoint (format `{0}`)")]
    Format(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint config hash {stored} does not match its config ({computed})")]
    HashMismatch { stored: String, computed: String },
    #[error("checkpoint was trained with config {checkpoint}, not {given}")]
    ConfigMismatch { checkpoint: String, given: String },
    #[error("checkpoint lacks the `{0}` network")]
    MissingNetwork(&'static str),
    #[error("network `{name}`: {source}")]
    Network { name: String, source: NnError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub networks: BTreeMap<String, Network>,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

/// Names of the networks a run of `kind` stores.
pub fn network_names(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Urn => &["empl"],
        ExperimentKind::Football | ExperimentKind::Bimodal => &["empl", "gaussian"],
    }
}

impl Checkpoint {
    pub fn new(config: &ExperimentConfig, networks: BTreeMap<String, Network>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config_hash: config.hash(),
            config: config.clone(),
            networks,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let header: Header = serde_json::from_str(text).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Format(header.format));
        }
        if header.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: header.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let checkpoint: Self = serde_json::from_str(text).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        checkpoint
            .config
            .validate()
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let computed = checkpoint.config.hash();
        if computed != checkpoint.config_hash {
            return Err(CheckpointError::HashMismatch {
                stored: checkpoint.config_hash,
                computed,
            });
        }
        for &name in network_names(checkpoint.config.kind) {
            let net = checkpoint.networks.get(name).ok_or(CheckpointError::MissingNetwork(name))?;
            net.check_shapes().map_err(|source| CheckpointError::Network {
                name: name.into(),
                source,
            })?;
        }
        Ok(checkpoint)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn network(&self, name: &'static str) -> Result<&Network, CheckpointError> {
        self.networks.get(name).ok_or(CheckpointError::MissingNetwork(name))
    }

    /// Errors unless `config` is the one this checkpoint was trained with.
    pub fn check_config(&self, config: &ExperimentConfig) -> Result<(), CheckpointError> {
        let given = config.hash();
        if given == self.config_hash {
            Ok(())
        } else {
            Err(CheckpointError::ConfigMismatch {
                checkpoint: self.config_hash.clone(),
                given,
            })
        }
    }
}
