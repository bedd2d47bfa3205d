//! Gating encoders `f(y, m) = y ⊙ gates(m)`.

use serde::{Deserialize, Serialize};

use super::mlp::{init_mlp, MlpParams, MlpVars, OutputActivation};
use crate::diffcore::{self, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Amortized encoder: a sigmoid-output MLP maps a target mask to gates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmortizedGateEncoder {
    pub gate_net: MlpParams,
}

/// Single-partition encoder with one learned logit per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedGateEncoder {
    pub w: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoder {
    Amortized(AmortizedGateEncoder),
    Fixed(FixedGateEncoder),
}

/// Tape handles for an encoder's parameters.
#[derive(Clone, Debug)]
pub enum EncoderVars {
    Amortized(MlpVars),
    Fixed(Var),
}

impl EncoderVars {
    pub fn all(&self) -> Vec<Var> {
        match self {
            EncoderVars::Amortized(v) => v.all(),
            EncoderVars::Fixed(w) => vec![*w],
        }
    }
}

impl AmortizedGateEncoder {
    pub fn new(d: usize, hidden: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            gate_net: init_mlp(&[d, hidden, d], OutputActivation::Sigmoid, seed)?,
        })
    }
}

impl FixedGateEncoder {
    pub fn new(d: usize) -> Self {
        Self {
            w: Tensor::zeros(&[d]),
        }
    }
}

impl Encoder {
    pub fn d(&self) -> usize {
        match self {
            Encoder::Amortized(e) => e.gate_net.input_dim(),
            Encoder::Fixed(e) => e.w.numel(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Encoder::Amortized(_) => "amortized",
            Encoder::Fixed(_) => "fixed",
        }
    }

    pub fn check_consistent(&self) -> Result<()> {
        match self {
            Encoder::Amortized(e) => {
                e.gate_net.check_consistent()?;
                if e.gate_net.input_dim() != e.gate_net.output_dim()
                    || e.gate_net.output_activation != OutputActivation::Sigmoid
                {
                    return Err(Error::Format(
                        "gate network must map d to d with a sigmoid output".into(),
                    ));
                }
                Ok(())
            }
            Encoder::Fixed(e) => match e.w.shape() {
                [_] => Ok(()),
                s => Err(Error::Format(format!("fixed gate logits must be a vector, got {s:?}"))),
            },
        }
    }

    pub fn params(&self) -> Vec<Tensor> {
        match self {
            Encoder::Amortized(e) => e.gate_net.params(),
            Encoder::Fixed(e) => vec![e.w.clone()],
        }
    }

    pub fn set_params(&mut self, params: &[Tensor]) -> Result<()> {
        match self {
            Encoder::Amortized(e) => e.gate_net.set_params(params),
            Encoder::Fixed(e) => match params {
                [w] => {
                    e.w.expect_same_shape(w)?;
                    e.w = w.clone();
                    Ok(())
                }
                _ => Err(Error::Shape("fixed encoder has exactly one parameter".into())),
            },
        }
    }

    /// Gates for a batch of masks `[n × d]`.
    pub fn gates(&self, masks: &Tensor) -> Result<Tensor> {
        let (n, d) = masks.dims2()?;
        if d != self.d() {
            return Err(Error::Shape(format!(
                "mask width {d} does not match encoder dimension {}",
                self.d()
            )));
        }
        match self {
            Encoder::Amortized(e) => e.gate_net.eval(masks),
            Encoder::Fixed(e) => {
                let logits = diffcore::add_row_bias(&Tensor::zeros(&[n, d]), &e.w)?;
                Ok(diffcore::sigmoid(&logits))
            }
        }
    }

    pub fn register(&self, tape: &mut Tape) -> EncoderVars {
        match self {
            Encoder::Amortized(e) => EncoderVars::Amortized(e.gate_net.register(tape)),
            Encoder::Fixed(e) => EncoderVars::Fixed(tape.param(e.w.clone())),
        }
    }

    /// Gates for the mask batch `masks` (a `[n × d]` node), recorded on `tape`.
    pub fn gates_on_tape(&self, tape: &mut Tape, vars: &EncoderVars, masks: Var) -> Result<Var> {
        match (self, vars) {
            (Encoder::Amortized(e), EncoderVars::Amortized(v)) => e.gate_net.forward(tape, v, masks),
            (Encoder::Fixed(_), EncoderVars::Fixed(w)) => {
                let (n, d) = tape.value(masks).dims2()?;
                let zeros = tape.constant(Tensor::zeros(&[n, d]));
                let logits = tape.add_bias(zeros, *w)?;
                Ok(tape.sigmoid(logits))
            }
            _ => Err(Error::Contract("encoder and tape handles disagree".into())),
        }
    }
}

/// Encodes `y` under mask `m`: returns `(y ⊙ gates, gates)`.
///
/// Accepts either single vectors of length `d` or `[n × d]` batches.
pub fn encoder_forward(enc: &Encoder, y: &Tensor, m: &Tensor) -> Result<(Tensor, Tensor)> {
    y.expect_same_shape(m)?;
    let single = y.shape().len() == 1;
    let masks = if single {
        m.clone().reshape(vec![1, m.numel()])?
    } else {
        m.clone()
    };
    let mut gates = enc.gates(&masks)?;
    if single {
        gates = gates.reshape(vec![m.numel()])?;
    }
    let f = y.zip_map(&gates, |a, g| a * g)?;
    Ok((f, gates))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(logits: Vec<f64>) -> Encoder {
        Encoder::Fixed(FixedGateEncoder {
            w: Tensor::vector(logits).unwrap(),
        })
    }

    #[test]
    fn zero_input_encodes_to_zero() {
        let enc = Encoder::Amortized(AmortizedGateEncoder::new(4, 16, 1).unwrap());
        let y = Tensor::zeros(&[4]);
        let m = Tensor::vector(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let (f, gates) = encoder_forward(&enc, &y, &m).unwrap();
        assert!(f.data().iter().all(|&v| v == 0.0));
        assert!(gates.data().iter().all(|&g| g > 0.0 && g < 1.0));
    }

    #[test]
    fn saturated_gates_pass_input_through() {
        let enc = fixed(vec![40.0; 3]);
        let y = Tensor::vector(vec![2.0, -1.0, 4.0]).unwrap();
        let (f, _) = encoder_forward(&enc, &y, &Tensor::vector(vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
        for (a, b) in f.data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn elementwise_product_with_known_gates() {
        let logit = |g: f64| (g / (1.0 - g)).ln();
        let enc = fixed(vec![logit(0.5), logit(0.1), logit(0.9)]);
        let y = Tensor::vector(vec![2.0, -1.0, 4.0]).unwrap();
        let (f, _) = encoder_forward(&enc, &y, &Tensor::vector(vec![0.0, 1.0, 0.0]).unwrap()).unwrap();
        for (a, b) in f.data().iter().zip([1.0, -0.1, 3.6]) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn linear_in_y_for_fixed_mask() {
        let enc = Encoder::Amortized(AmortizedGateEncoder::new(5, 8, 2).unwrap());
        let y = Tensor::vector(vec![0.3, -1.0, 2.0, 0.0, 1.5]).unwrap();
        let m = Tensor::vector(vec![0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let (f, _) = encoder_forward(&enc, &y, &m).unwrap();
        let (f3, _) = encoder_forward(&enc, &y.map(|v| 3.0 * v), &m).unwrap();
        for (a, b) in f3.data().iter().zip(f.data()) {
            assert!((a - 3.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_is_a_shape_error() {
        let enc = fixed(vec![0.0; 3]);
        let err = encoder_forward(&enc, &Tensor::zeros(&[2]), &Tensor::zeros(&[2])).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }
}
