use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::diffcore::{self, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    None,
    Sigmoid,
}

/// Fully connected network with ReLU hidden layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Tensor>,
    pub biases: Vec<Tensor>,
    pub output_activation: OutputActivation,
}

/// Tape handles for one registration of an [`MlpParams`].
#[derive(Clone, Debug)]
pub struct MlpVars {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
}

impl MlpVars {
    /// Handles in the same order as [`MlpParams::params`].
    pub fn all(&self) -> Vec<Var> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [*w, *b])
            .collect()
    }

    /// Inverse of [`MlpVars::all`]: `[w0, b0, w1, b1, …]`.
    pub fn from_flat(vars: &[Var]) -> Self {
        Self {
            weights: vars.iter().step_by(2).copied().collect(),
            biases: vars.iter().skip(1).step_by(2).copied().collect(),
        }
    }
}

/// Glorot-uniform weights and zero biases, deterministic in `seed`.
pub fn init_mlp(dims: &[usize], output_activation: OutputActivation, seed: u64) -> Result<MlpParams> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::Parameter(format!(
            "mlp needs at least two positive layer sizes, got {dims:?}"
        )));
    }
    let mut rng = seeded(seed);
    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = glorot_limit(fan_in, fan_out);
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot limit");
        let data = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
        weights.push(Tensor::new(vec![fan_in, fan_out], data)?);
        biases.push(Tensor::zeros(&[fan_out]));
    }
    Ok(MlpParams {
        layer_dims: dims.to_vec(),
        weights,
        biases,
        output_activation,
    })
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl MlpParams {
    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("at least two layers")
    }

    pub fn check_consistent(&self) -> Result<()> {
        let layers = self.layer_dims.len().saturating_sub(1);
        if layers == 0 || self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::Format(format!(
                "mlp with dims {:?} has {} weights and {} biases",
                self.layer_dims,
                self.weights.len(),
                self.biases.len()
            )));
        }
        for (i, pair) in self.layer_dims.windows(2).enumerate() {
            if self.weights[i].shape() != [pair[0], pair[1]] || self.biases[i].shape() != [pair[1]] {
                return Err(Error::Format(format!(
                    "layer {i}: weight {:?} / bias {:?} do not match dims {:?}",
                    self.weights[i].shape(),
                    self.biases[i].shape(),
                    pair
                )));
            }
        }
        Ok(())
    }

    /// Parameters as `[w0, b0, w1, b1, ...]`.
    pub fn params(&self) -> Vec<Tensor> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.clone(), b.clone()])
            .collect()
    }

    /// Inverse of [`params`](Self::params).
    pub fn set_params(&mut self, params: &[Tensor]) -> Result<()> {
        if params.len() != 2 * self.weights.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                2 * self.weights.len(),
                params.len()
            )));
        }
        for (i, pair) in params.chunks(2).enumerate() {
            self.weights[i].expect_same_shape(&pair[0])?;
            self.biases[i].expect_same_shape(&pair[1])?;
            self.weights[i] = pair[0].clone();
            self.biases[i] = pair[1].clone();
        }
        Ok(())
    }

    /// Forward pass on a batch `[n × input_dim]` without recording a tape.
    pub fn eval(&self, input: &Tensor) -> Result<Tensor> {
        let last = self.weights.len() - 1;
        let mut h = input.clone();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = diffcore::add_row_bias(&diffcore::matmul(&h, w)?, b)?;
            if i < last {
                h = diffcore::relu(&h);
            }
        }
        Ok(match self.output_activation {
            OutputActivation::None => h,
            OutputActivation::Sigmoid => diffcore::sigmoid(&h),
        })
    }

    pub fn register(&self, tape: &mut Tape) -> MlpVars {
        MlpVars {
            weights: self.weights.iter().map(|w| tape.param(w.clone())).collect(),
            biases: self.biases.iter().map(|b| tape.param(b.clone())).collect(),
        }
    }

    /// Same computation as [`eval`](Self::eval), recorded on `tape`.
    pub fn forward(&self, tape: &mut Tape, vars: &MlpVars, input: Var) -> Result<Var> {
        let last = vars.weights.len() - 1;
        let mut h = input;
        for (i, (w, b)) in vars.weights.iter().zip(&vars.biases).enumerate() {
            h = tape.matmul(h, *w)?;
            h = tape.add_bias(h, *b)?;
            if i < last {
                h = tape.relu(h);
            }
        }
        Ok(match self.output_activation {
            OutputActivation::None => h,
            OutputActivation::Sigmoid => tape.sigmoid(h),
        })
    }
}
