use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the zero-flow term is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZfMode {
    /// Velocity evaluated exactly at `t = 0.5` with weight 1.
    #[default]
    Midpoint,
    /// Velocity at the sampled `t`, weighted by `exp(-|t - 0.5| / b)`.
    Kernel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Gate network `σ_β(m)` shared across masks.
    #[default]
    Amortized,
    /// One gate logit vector for a single fixed partition.
    Fixed,
}

/// Hyperparameters of one training run. Every field has a default, so a
/// TOML file only needs to list what it overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub lambda_sparsity: f64,
    pub omega_bandwidth: f64,
    pub beta_alpha: f64,
    pub zf_weight: f64,
    pub zf_mode: ZfMode,
    pub weight_decay: f64,
    pub seed: u64,
    pub encoder: EncoderKind,
    pub encoder_hidden: usize,
    pub velocity_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 400,
            iterations: 5000,
            lambda_sparsity: 3e-9,
            omega_bandwidth: 5e-4,
            beta_alpha: 4.0,
            zf_weight: 1.0,
            zf_mode: ZfMode::Midpoint,
            weight_decay: 0.0,
            seed: 0,
            encoder: EncoderKind::Amortized,
            encoder_hidden: 128,
            velocity_hidden: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr", self.lr),
            ("lambda_sparsity", self.lambda_sparsity),
            ("omega_bandwidth", self.omega_bandwidth),
            ("beta_alpha", self.beta_alpha),
            ("zf_weight", self.zf_weight),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {value}")));
            }
        }
        for (name, value) in [
            ("batch_size", self.batch_size),
            ("iterations", self.iterations),
            ("encoder_hidden", self.encoder_hidden),
            ("velocity_hidden", self.velocity_hidden),
        ] {
            if value == 0 {
                return Err(Error::Parameter(format!("{name} must be positive")));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Parameter(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            toml::from_str(text).map_err(|e| Error::Format(format!("train config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_toml(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("train config always serializes")
    }
}
