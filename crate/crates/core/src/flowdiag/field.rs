use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::diffcore::{adam_step, concat, AdamState, Tape, Tensor};
use crate::error::{Error, Result};
use crate::models::{init_mlp, MlpParams, OutputActivation};
use crate::rng::{derive_seed, seeded, Rng64};
use crate::trainer::{sample_beta, TrainConfig};

/// A time-dependent vector field `v_t(z)` on `ℝ^d`.
pub trait VelocityField {
    fn dim(&self) -> usize;

    /// Velocities at the rows of `z` (`[k × d]`) at a common time `t`.
    fn velocity(&self, z: &Tensor, t: f64) -> Result<Tensor>;
}

/// Source and target 1-D Gaussians `N(μ0, σ0²)` and `N(μ1, σ1²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPair {
    pub mu0: f64,
    pub sigma0: f64,
    pub mu1: f64,
    pub sigma1: f64,
}

impl GaussianPair {
    pub fn new(mu0: f64, sigma0: f64, mu1: f64, sigma1: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma1 > 0.0) || ![mu0, sigma0, mu1, sigma1].iter().all(|v| v.is_finite()) {
            return Err(Error::Parameter(format!(
                "gaussian pair needs finite means and positive sigmas, got ({mu0}, {sigma0}) → ({mu1}, {sigma1})"
            )));
        }
        Ok(Self { mu0, sigma0, mu1, sigma1 })
    }

    pub fn standard() -> Self {
        Self::new(0.0, 1.0, 0.0, 1.0).expect("valid constants")
    }
}

/// `E[X' − X | X_t = z]` for independent `X ~ N(μ0, σ0²)`, `X' ~ N(μ1, σ1²)`.
pub fn analytic_velocity(pair: &GaussianPair, t: f64, z: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Parameter(format!("t must lie in (0, 1), got {t}")));
    }
    velocity_formula(pair, t, z)
}

fn velocity_formula(pair: &GaussianPair, t: f64, z: f64) -> Result<f64> {
    let (s0, s1) = (pair.sigma0 * pair.sigma0, pair.sigma1 * pair.sigma1);
    let m_t = t * pair.mu1 + (1.0 - t) * pair.mu0;
    let var_t = t * t * s1 + (1.0 - t) * (1.0 - t) * s0;
    if !(var_t > 0.0) {
        return Err(Error::Degenerate("interpolant variance is zero".into()));
    }
    Ok((pair.mu1 - pair.mu0) + (t * s1 - (1.0 - t) * s0) * (z - m_t) / var_t)
}

/// The closed-form field of a [`GaussianPair`], applied coordinatewise.
/// Unlike [`analytic_velocity`] it also accepts the endpoints `t = 0, 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticField {
    pub pair: GaussianPair,
    pub d: usize,
}

impl VelocityField for AnalyticField {
    fn dim(&self) -> usize {
        self.d
    }

    fn velocity(&self, z: &Tensor, t: f64) -> Result<Tensor> {
        check_points(z, self.d)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Parameter(format!("t must lie in [0, 1], got {t}")));
        }
        let data = z
            .data()
            .iter()
            .map(|&v| velocity_formula(&self.pair, t, v))
            .collect::<Result<Vec<_>>>()?;
        Tensor::new(z.shape().to_vec(), data)
    }
}

/// `v ≡ c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantField {
    pub c: Vec<f64>,
}

impl ConstantField {
    pub fn zero(d: usize) -> Self {
        Self { c: vec![0.0; d] }
    }
}

impl VelocityField for ConstantField {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn velocity(&self, z: &Tensor, _t: f64) -> Result<Tensor> {
        let (k, d) = check_points(z, self.c.len())?;
        Tensor::new(vec![k, d], self.c.iter().copied().cycle().take(k * d).collect())
    }
}

pub(crate) fn check_points(z: &Tensor, d: usize) -> Result<(usize, usize)> {
    let (k, zd) = z.dims2()?;
    if zd != d {
        return Err(Error::Shape(format!("points have width {zd}, field has dimension {d}")));
    }
    Ok((k, zd))
}

/// Unconditional rectified-flow field `v_t(z)`, an MLP on `z ∥ t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncondVelocityNet {
    pub net: MlpParams,
}

impl UncondVelocityNet {
    pub fn new(d: usize, hidden: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            net: init_mlp(&[d + 1, hidden, d], OutputActivation::None, seed)?,
        })
    }
}

pub(crate) fn time_column(k: usize, t: f64) -> Tensor {
    Tensor::filled(&[k, 1], t)
}

impl VelocityField for UncondVelocityNet {
    fn dim(&self) -> usize {
        self.net.output_dim()
    }

    fn velocity(&self, z: &Tensor, t: f64) -> Result<Tensor> {
        let (k, _) = check_points(z, self.dim())?;
        self.net.eval(&concat(&[z, &time_column(k, t)], 1)?)
    }
}

/// Fits `net` by Adam on `mean_rows ‖target − net(input)‖²`, drawing a fresh
/// `(input, target)` batch from `draw` each iteration.
pub(crate) fn fit_regression(
    net: &mut MlpParams,
    cfg: &TrainConfig,
    rng: &mut Rng64,
    mut draw: impl FnMut(&mut Rng64) -> Result<(Tensor, Tensor)>,
) -> Result<()> {
    let mut params = net.params();
    let mut adam = AdamState::new(&params, cfg.lr, cfg.weight_decay);
    for iter in 0..cfg.iterations {
        let (input, target) = draw(rng)?;
        let n = input.rows();
        let mut tape = Tape::new();
        let vars = net.register(&mut tape);
        let x = tape.constant(input);
        let out = net.forward(&mut tape, &vars, x)?;
        let target = tape.constant(target);
        let diff = tape.sub(target, out)?;
        let sq = tape.square(diff);
        let s = tape.sum(sq);
        let loss = tape.scale(s, 1.0 / n as f64);
        if !tape.value(loss).item().is_finite() {
            return Err(Error::Numeric(format!("regression loss became non-finite at iteration {iter}")));
        }
        let grads = tape.backward(loss)?;
        let grads: Vec<Tensor> = vars
            .all()
            .into_iter()
            .zip(&params)
            .map(|(v, p)| grads.get_or_zeros(v, p.shape()))
            .collect();
        adam_step(&mut params, &grads, &mut adam)
            .map_err(|e| Error::Numeric(format!("iteration {iter}: {e}")))?;
        net.set_params(&params)?;
    }
    Ok(())
}

pub(crate) fn random_rows(data: &Tensor, k: usize, rng: &mut Rng64) -> Vec<usize> {
    let n = data.rows();
    (0..k).map(|_| rng.random_range(0..n)).collect()
}

/// Rectified flow from `p_samples` to `q_samples` under independent coupling.
pub fn train_unconditional(p_samples: &Dataset, q_samples: &Dataset, cfg: &TrainConfig) -> Result<UncondVelocityNet> {
    cfg.validate()?;
    let d = p_samples.d();
    if q_samples.d() != d {
        return Err(Error::Shape(format!("source has d = {d}, target has d = {}", q_samples.d())));
    }
    let mut vnet = UncondVelocityNet::new(d, cfg.velocity_hidden, derive_seed(cfg.seed, 2))?;
    let mut rng = seeded(derive_seed(cfg.seed, 3));
    let (p, q) = (&p_samples.samples, &q_samples.samples);
    let b = cfg.batch_size;
    fit_regression(&mut vnet.net, cfg, &mut rng, |rng| {
        let ip = random_rows(p, b, rng);
        let iq = random_rows(q, b, rng);
        let mut input = Vec::with_capacity(b * (d + 1));
        let mut target = Vec::with_capacity(b * d);
        for (&a, &c) in ip.iter().zip(&iq) {
            let t = sample_beta(cfg.beta_alpha, rng)?;
            let (x0, x1) = (p.row(a), q.row(c));
            input.extend(x0.iter().zip(x1).map(|(u, v)| t * v + (1.0 - t) * u));
            input.push(t);
            target.extend(x0.iter().zip(x1).map(|(u, v)| v - u));
        }
        Ok((Tensor::new(vec![b, d + 1], input)?, Tensor::new(vec![b, d], target)?))
    })?;
    Ok(vnet)
}
