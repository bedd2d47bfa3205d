use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Optimizer state for Adam with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamState {
    /// Zeroed moments for parameters of the given shapes, with the usual
    /// defaults `β1 = 0.9`, `β2 = 0.999`, `eps = 1e-8`.
    pub fn new(params: &[Tensor], lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// One bias-corrected Adam step. Weight decay is applied directly to the
/// parameters (`p ← p − lr·wd·p`) rather than folded into the gradient.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        p.expect_same_shape(g)?;
        p.expect_same_shape(&state.m[i])?;
        if !g.all_finite() {
            return Err(Error::Numeric(format!("non-finite gradient for parameter {i}")));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (lr, b1, b2, eps, wd) = (state.lr, state.beta1, state.beta2, state.eps, state.weight_decay);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let iter = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((pv, &gv), (mv, vv)) in iter {
            *mv = b1 * *mv + (1.0 - b1) * gv;
            *vv = b2 * *vv + (1.0 - b2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= lr * wd * *pv;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity_without_decay() {
        let mut params = vec![Tensor::vector(vec![1.0, -2.0, 3.5]).unwrap()];
        let before = params.clone();
        let mut state = AdamState::new(&params, 1e-4, 0.0);
        adam_step(&mut params, &[Tensor::zeros(&[3])], &mut state).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut params = vec![Tensor::scalar(0.0)];
        let mut state = AdamState::new(&params, 1e-4, 0.0);
        adam_step(&mut params, &[Tensor::scalar(1.0)], &mut state).unwrap();
        assert!((params[0].item() + 1e-4).abs() < 1e-12);
    }

    #[test]
    fn decoupled_weight_decay() {
        let mut params = vec![Tensor::scalar(1.0)];
        let mut state = AdamState::new(&params, 1e-4, 0.1);
        adam_step(&mut params, &[Tensor::scalar(0.0)], &mut state).unwrap();
        assert!((params[0].item() - (1.0 - 1e-5)).abs() < 1e-15);
    }

    #[test]
    fn nan_gradient_is_a_numeric_error() {
        let mut params = vec![Tensor::scalar(1.0)];
        let mut state = AdamState::new(&params, 1e-4, 0.0);
        let bad = Tensor::from_parts(vec![], vec![f64::NAN]);
        assert!(matches!(
            adam_step(&mut params, &[bad], &mut state),
            Err(Error::Numeric(_))
        ));
    }
}
