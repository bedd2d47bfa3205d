use serde::{Deserialize, Serialize};

use super::mlp::{init_mlp, MlpParams, MlpVars, OutputActivation};
use crate::diffcore::{self, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Conditional velocity field `u_t(x_t, f, y, m)`. The network input is the
/// row-wise concatenation `x_t ∥ f ∥ y ∥ m ∥ t` of width `4d + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityNet {
    pub net: MlpParams,
}

impl VelocityNet {
    pub fn new(d: usize, hidden: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            net: init_mlp(&[4 * d + 1, hidden, d], OutputActivation::None, seed)?,
        })
    }

    pub fn d(&self) -> usize {
        self.net.output_dim()
    }

    pub fn check_consistent(&self) -> Result<()> {
        self.net.check_consistent()?;
        if self.net.input_dim() != 4 * self.d() + 1 || self.net.output_activation != OutputActivation::None {
            return Err(Error::Format(format!(
                "velocity net dims {:?} are not (4d+1 → … → d) with linear output",
                self.net.layer_dims
            )));
        }
        Ok(())
    }

    fn assemble(&self, x_t: &Tensor, f_enc: &Tensor, y: &Tensor, m: &Tensor, t: &Tensor) -> Result<Tensor> {
        let (n, d) = x_t.dims2()?;
        if d != self.d() {
            return Err(Error::Shape(format!(
                "velocity net expects width {}, got {d}",
                self.d()
            )));
        }
        for other in [f_enc, y, m] {
            x_t.expect_same_shape(other)?;
        }
        if t.numel() != n {
            return Err(Error::Shape(format!("{} time values for {n} rows", t.numel())));
        }
        let t_col = t.clone().reshape(vec![n, 1])?;
        diffcore::concat(&[x_t, f_enc, y, m, &t_col], 1)
    }

    /// Batched forward pass; all matrices are `[n × d]` and `t` has `n` entries.
    pub fn eval(&self, x_t: &Tensor, f_enc: &Tensor, y: &Tensor, m: &Tensor, t: &Tensor) -> Result<Tensor> {
        let input = self.assemble(x_t, f_enc, y, m, t)?;
        self.net.eval(&input)
    }

    pub fn register(&self, tape: &mut Tape) -> MlpVars {
        self.net.register(tape)
    }

    /// Taped forward pass. `f_enc` is usually an encoder output node; the
    /// remaining inputs are constants and `t` is an `[n × 1]` column.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        vars: &MlpVars,
        x_t: Var,
        f_enc: Var,
        y: Var,
        m: Var,
        t: Var,
    ) -> Result<Var> {
        let n = tape.value(x_t).rows();
        if tape.value(t).shape() != [n, 1] {
            return Err(Error::Shape(format!("time must be an [{n} × 1] column, got {:?}", tape.value(t).shape())));
        }
        let input = tape.concat(&[x_t, f_enc, y, m, t], 1)?;
        self.net.forward(tape, vars, input)
    }
}

/// Single-sample convenience wrapper around [`VelocityNet::eval`].
pub fn velocity_forward(
    vnet: &VelocityNet,
    x_t: &Tensor,
    f_enc: &Tensor,
    y: &Tensor,
    m: &Tensor,
    t: f64,
) -> Result<Tensor> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Parameter(format!("t must lie in [0, 1], got {t}")));
    }
    let d = x_t.numel();
    let row = |v: &Tensor| -> Result<Tensor> {
        if v.shape() != [d] {
            return Err(Error::Shape(format!("expected a vector of length {d}, got {:?}", v.shape())));
        }
        v.clone().reshape(vec![1, d])
    };
    let out = vnet.eval(&row(x_t)?, &row(f_enc)?, &row(y)?, &row(m)?, &Tensor::vector(vec![t])?)?;
    out.reshape(vec![d])
}
