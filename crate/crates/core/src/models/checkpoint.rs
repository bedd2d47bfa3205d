//! Versioned JSON checkpoints.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::Encoder;
use super::velocity::VelocityNet;
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;

/// Descriptive metadata used by the query tools and the HTTP service.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckpointMeta {
    /// Mask strategy the encoder was trained with, e.g. `one_hot` or `window:5`.
    pub mask_kind: String,
    /// Column names of the training data, when it had any.
    pub feature_names: Option<Vec<String>>,
    /// Free-form description of the training data.
    pub trained_on: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub d: usize,
    pub seed: u64,
    pub train_config: TrainConfig,
    pub encoder: Encoder,
    pub velocity: VelocityNet,
    #[serde(default)]
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn validate(&self) -> Result<()> {
        self.encoder.check_consistent()?;
        self.velocity.check_consistent()?;
        if self.encoder.d() != self.d || self.velocity.d() != self.d {
            return Err(Error::Format(format!(
                "checkpoint d = {} but encoder has {} and velocity net has {}",
                self.d,
                self.encoder.d(),
                self.velocity.d()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("checkpoint json: {e}")))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Format("checkpoint has no integer format_version".into()))?;
        if version > u64::from(FORMAT_VERSION) {
            return Err(Error::Version {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                supported: FORMAT_VERSION,
            });
        }
        let ckpt: Checkpoint =
            serde_json::from_value(value).map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}

/// Writes the checkpoint through a temporary file and a rename, so readers
/// never observe a partially written document.
pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("checkpoint")
    ));
    let write = || -> std::io::Result<()> {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(ckpt.to_json().as_bytes())?;
        file.write_all(b"\n")?;
        file.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json(&text)
}
