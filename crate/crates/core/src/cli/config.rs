use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blanket::{DEFAULT_TOPK, DEFAULT_WINDOW};
use crate::datagen::{GraphKind, GraphSpec, MarginalTransform};
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

pub const CHAIN_WEIGHTS: [f64; 3] = [0.8, 0.4, 0.2];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GraphChoice {
    #[default]
    Chain,
    Lattice,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TransformChoice {
    #[default]
    Gaussian,
    Nonparanormal,
    Truncated,
}

/// Synthetic data settings for `gen-data` and seeded `eval-roc` loops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataOptions {
    pub graph: GraphChoice,
    pub d: usize,
    /// Chain order.
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub margin: f64,
    pub lattice_weight: f64,
    pub transform: TransformChoice,
    pub gamma: f64,
    /// Truncation threshold; `-inf` disables truncation.
    pub tau: f64,
    pub gibbs_burnin: usize,
    pub gibbs_thin: usize,
    pub n: usize,
    pub seed: u64,
}

impl Default for DataOptions {
    fn default() -> Self {
        Self {
            graph: GraphChoice::Chain,
            d: 50,
            k: 3,
            weights: None,
            margin: GraphSpec::DEFAULT_MARGIN,
            lattice_weight: GraphSpec::DEFAULT_LATTICE_WEIGHT,
            transform: TransformChoice::Gaussian,
            gamma: MarginalTransform::DEFAULT_GAMMA,
            tau: MarginalTransform::DEFAULT_TAU,
            gibbs_burnin: MarginalTransform::DEFAULT_BURNIN,
            gibbs_thin: MarginalTransform::DEFAULT_THIN,
            n: 2048,
            seed: 0,
        }
    }
}

impl DataOptions {
    pub fn graph_spec(&self) -> Result<GraphSpec> {
        let mut spec = match self.graph {
            GraphChoice::Chain => {
                let weights = match &self.weights {
                    Some(w) if w.len() == self.k => w.clone(),
                    Some(w) => {
                        return Err(Error::Parameter(format!("{} weights given for chain order k = {}", w.len(), self.k)))
                    }
                    None if self.k <= CHAIN_WEIGHTS.len() => CHAIN_WEIGHTS[..self.k].to_vec(),
                    None => {
                        return Err(Error::Parameter(format!(
                            "chain order k = {} needs explicit --weights",
                            self.k
                        )))
                    }
                };
                if self.d <= self.k {
                    return Err(Error::Parameter(format!("chain needs d > k, got d = {}, k = {}", self.d, self.k)));
                }
                GraphSpec::chain(self.d, weights)
            }
            GraphChoice::Lattice => {
                let side = (self.d as f64).sqrt().round() as usize;
                if side * side != self.d {
                    return Err(Error::Parameter(format!("lattice needs a square d, got {}", self.d)));
                }
                let mut s = GraphSpec::lattice(side);
                if let GraphKind::Lattice { weight, .. } = &mut s.kind {
                    *weight = self.lattice_weight;
                }
                s
            }
        };
        spec.margin = self.margin;
        Ok(spec)
    }

    pub fn marginal(&self) -> MarginalTransform {
        match self.transform {
            TransformChoice::Gaussian => MarginalTransform::Gaussian,
            TransformChoice::Nonparanormal => MarginalTransform::Nonparanormal { gamma: self.gamma },
            TransformChoice::Truncated => MarginalTransform::Truncated {
                tau: self.tau,
                gibbs_burnin: self.gibbs_burnin,
                gibbs_thin: self.gibbs_thin,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketOptions {
    pub window: usize,
    pub topk: usize,
}

impl Default for MarketOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            topk: DEFAULT_TOPK,
        }
    }
}

/// A `--config` file, and the `resolved.toml` every run writes. Each table
/// is optional; missing keys fall back to built-in defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketOptions>,
    /// Input paths and other per-run values, recorded for audit only.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config always serializes")
    }
}
