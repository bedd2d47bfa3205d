use serde::{Deserialize, Serialize};

use super::batch::{interpolate, omega, Batch};
use super::config::{TrainConfig, ZfMode};
use crate::diffcore::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::models::{Encoder, EncoderVars, MlpVars, VelocityNet};

/// The objective's components at one step; `total = rf + κ·zf + λ·sparsity`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rf: f64,
    pub zf: f64,
    pub sparsity: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn combine(rf: f64, zf: f64, sparsity: f64, cfg: &TrainConfig) -> Self {
        Self {
            rf,
            zf,
            sparsity,
            total: rf + cfg.zf_weight * zf + cfg.lambda_sparsity * sparsity,
        }
    }
}

fn mean_masked_sq(residual: &Tensor, m: &Tensor, row_weights: Option<&[f64]>) -> Result<f64> {
    let (n, d) = residual.dims2()?;
    residual.expect_same_shape(m)?;
    let mut total = 0.0;
    for i in 0..n {
        let row: f64 = (0..d)
            .map(|j| {
                let r = residual.get2(i, j) * m.get2(i, j);
                r * r
            })
            .sum();
        total += row * row_weights.map_or(1.0, |w| w[i]);
    }
    Ok(total / n as f64)
}

/// Batch mean of `‖(xp − x − vhat) ⊙ m‖²`.
pub fn rf_loss(vhat: &Tensor, x: &Tensor, xp: &Tensor, m: &Tensor) -> Result<f64> {
    x.expect_same_shape(xp)?;
    let target = xp.zip_map(x, |a, b| a - b)?;
    let residual = target.zip_map(vhat, |a, b| a - b)?;
    mean_masked_sq(&residual, m, None)
}

/// Batch mean of `Σ_j gates_j`.
pub fn gate_sparsity(gates: &Tensor) -> Result<f64> {
    let (n, _) = gates.dims2()?;
    Ok(gates.sum() / n as f64)
}

fn midpoint_inputs(batch: &Batch) -> Result<(Tensor, Tensor)> {
    let n = batch.len();
    let x_mid = interpolate(&batch.x, &batch.xp, &vec![0.5; n])?;
    Ok((x_mid, Tensor::filled(&[n], 0.5)))
}

fn kernel_weights(t: &Tensor, b: f64) -> Vec<f64> {
    t.data().iter().map(|&ti| omega(ti, b)).collect()
}

/// Zero-flow penalty conditioned on the matched pair's own context `f(Y)`.
pub fn zf_penalty(vnet: &VelocityNet, encoder: &Encoder, batch: &Batch, mode: ZfMode, b: f64) -> Result<f64> {
    let gates = encoder.gates(&batch.m)?;
    let f_y = batch.y.zip_map(&gates, |a, g| a * g)?;
    match mode {
        ZfMode::Midpoint => {
            let (x_mid, t_mid) = midpoint_inputs(batch)?;
            let v = vnet.eval(&x_mid, &f_y, &batch.y, &batch.m, &t_mid)?;
            mean_masked_sq(&v, &batch.m, None)
        }
        ZfMode::Kernel => {
            let v = vnet.eval(&batch.x_t, &f_y, &batch.y, &batch.m, &batch.t)?;
            mean_masked_sq(&v, &batch.m, Some(&kernel_weights(&batch.t, b)))
        }
    }
}

/// Evaluates all objective components without building a tape.
pub fn evaluate_objective(vnet: &VelocityNet, encoder: &Encoder, batch: &Batch, cfg: &TrainConfig) -> Result<LossBreakdown> {
    let gates = encoder.gates(&batch.m)?;
    let f_yp = batch.yp.zip_map(&gates, |a, g| a * g)?;
    let vhat = vnet.eval(&batch.x_t, &f_yp, &batch.y, &batch.m, &batch.t)?;
    let rf = rf_loss(&vhat, &batch.x, &batch.xp, &batch.m)?;
    let zf = zf_penalty(vnet, encoder, batch, cfg.zf_mode, cfg.omega_bandwidth)?;
    let sparsity = gate_sparsity(&gates)?;
    Ok(LossBreakdown::combine(rf, zf, sparsity, cfg))
}

/// Tape nodes of the objective.
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveVars {
    pub rf: Var,
    pub zf: Var,
    pub sparsity: Var,
    pub total: Var,
}

impl ObjectiveVars {
    pub fn breakdown(&self, tape: &Tape) -> LossBreakdown {
        let v = |var: Var| tape.value(var).item();
        LossBreakdown {
            rf: v(self.rf),
            zf: v(self.zf),
            sparsity: v(self.sparsity),
            total: v(self.total),
        }
    }
}

/// `mean_i w_i·‖r_i ⊙ m_i‖²` on the tape; `weights` is a per-element constant.
fn masked_sq_on_tape(tape: &mut Tape, residual: Var, m: &Tensor, weights: Option<Tensor>) -> Result<Var> {
    let n = m.rows();
    let masked = tape.mul_const(residual, m.clone())?;
    let mut sq = tape.square(masked);
    if let Some(w) = weights {
        sq = tape.mul_const(sq, w)?;
    }
    let s = tape.sum(sq);
    Ok(tape.scale(s, 1.0 / n as f64))
}

fn broadcast_rows(row_weights: &[f64], d: usize) -> Result<Tensor> {
    let data = row_weights.iter().flat_map(|&w| std::iter::repeat_n(w, d)).collect();
    Tensor::new(vec![row_weights.len(), d], data)
}

/// Records the full objective on `tape` with gradients flowing into both networks.
#[allow(clippy::too_many_arguments)]
pub fn objective_on_tape(
    tape: &mut Tape,
    encoder: &Encoder,
    enc_vars: &EncoderVars,
    vnet: &VelocityNet,
    vel_vars: &MlpVars,
    batch: &Batch,
    cfg: &TrainConfig,
) -> Result<ObjectiveVars> {
    let (n, d) = batch.x.dims2()?;
    if vnet.d() != d || encoder.d() != d {
        return Err(Error::Shape(format!(
            "batch width {d}, encoder {}, velocity net {}",
            encoder.d(),
            vnet.d()
        )));
    }
    let m = tape.constant(batch.m.clone());
    let y = tape.constant(batch.y.clone());
    let gates = encoder.gates_on_tape(tape, enc_vars, m)?;

    let f_yp = tape.mul_const(gates, batch.yp.clone())?;
    let x_t = tape.constant(batch.x_t.clone());
    let t = tape.constant(batch.t.clone().reshape(vec![n, 1])?);
    let vhat = vnet.forward_on_tape(tape, vel_vars, x_t, f_yp, y, m, t)?;
    let target = tape.constant(batch.xp.zip_map(&batch.x, |a, b| a - b)?);
    let residual = tape.sub(target, vhat)?;
    let rf = masked_sq_on_tape(tape, residual, &batch.m, None)?;

    let f_y = tape.mul_const(gates, batch.y.clone())?;
    let zf = match cfg.zf_mode {
        ZfMode::Midpoint => {
            let (x_mid, t_mid) = midpoint_inputs(batch)?;
            let (x_mid, t_mid) = (tape.constant(x_mid), tape.constant(t_mid.reshape(vec![n, 1])?));
            let v = vnet.forward_on_tape(tape, vel_vars, x_mid, f_y, y, m, t_mid)?;
            masked_sq_on_tape(tape, v, &batch.m, None)?
        }
        ZfMode::Kernel => {
            let v = vnet.forward_on_tape(tape, vel_vars, x_t, f_y, y, m, t)?;
            let w = broadcast_rows(&kernel_weights(&batch.t, cfg.omega_bandwidth), d)?;
            masked_sq_on_tape(tape, v, &batch.m, Some(w))?
        }
    };

    let gate_sum = tape.sum(gates);
    let sparsity = tape.scale(gate_sum, 1.0 / n as f64);

    let zf_w = tape.scale(zf, cfg.zf_weight);
    let sp_w = tape.scale(sparsity, cfg.lambda_sparsity);
    let partial = tape.add(rf, zf_w)?;
    let total = tape.add(partial, sp_w)?;
    Ok(ObjectiveVars {
        rf,
        zf,
        sparsity,
        total,
    })
}
