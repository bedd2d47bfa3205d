use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares tape gradients of `f` against central finite differences.
///
/// `f` receives a fresh tape and the parameter leaves registered on it, and
/// must return a scalar node. The result is the largest relative error
/// `|g_ad − g_fd| / max(1e-8, |g_ad| + |g_fd|)` over every coordinate of
/// every parameter (0 when there are no coordinates).
pub fn grad_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }

    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|p| tape.param(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let value = tape.value(out).item();
        if !value.is_finite() {
            return Err(Error::Numeric(format!("objective evaluated to {value}")));
        }
        Ok(value)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if !tape.value(out).item().is_finite() {
        return Err(Error::Numeric("objective is not finite".into()));
    }
    let grads = tape.backward(out)?;

    let mut perturbed: Vec<Tensor> = params.to_vec();
    let mut worst: f64 = 0.0;
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(*var, params[pi].shape());
        for k in 0..params[pi].numel() {
            let orig = params[pi].data()[k];
            perturbed[pi].data_mut()[k] = orig + eps;
            let plus = eval(&perturbed)?;
            perturbed[pi].data_mut()[k] = orig - eps;
            let minus = eval(&perturbed)?;
            perturbed[pi].data_mut()[k] = orig;

            let fd = (plus - minus) / (2.0 * eps);
            let ad = analytic.data()[k];
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_tight() {
        let w = Tensor::vector(vec![0.3, -1.2, 2.0]).unwrap();
        let err = grad_check(
            |tape, p| {
                let sq = tape.square(p[0]);
                Ok(tape.sum(sq))
            },
            &[w],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn empty_parameter_set_is_vacuous() {
        let err = grad_check(
            |tape, _| Ok(tape.constant(Tensor::scalar(1.0))),
            &[],
            1e-5,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn non_positive_eps_is_rejected() {
        assert!(grad_check(|tape, _| Ok(tape.constant(Tensor::scalar(0.0))), &[], 0.0).is_err());
    }
}
