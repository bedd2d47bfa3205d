use rand::Rng;
use serde::{Deserialize, Serialize};

use super::field::{fit_regression, random_rows};
use crate::datagen::Dataset;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::models::{init_mlp, MlpParams, OutputActivation};
use crate::rng::{derive_seed, seeded};
use crate::trainer::{sample_beta, TrainConfig};

/// Rows at the end of the demo data kept out of training.
pub const HELD_OUT: usize = 512;

/// Conditional field `v(x_t, c, y, t)` for a scalar `X` given a scalar `Y`
/// and a conditioning value `c = f(y')`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyNet {
    pub net: MlpParams,
}

impl SufficiencyNet {
    pub fn velocity(&self, x_t: &[f64], c: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
        let k = x_t.len();
        if c.len() != k || y.len() != k {
            return Err(Error::Shape(format!("input lengths {k}, {}, {}", c.len(), y.len())));
        }
        let mut input = Vec::with_capacity(4 * k);
        for i in 0..k {
            input.extend([x_t[i], c[i], y[i], t]);
        }
        Ok(self.net.eval(&Tensor::new(vec![k, 4], input)?)?.into_data())
    }
}

fn split_xy(data: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    if data.d() != 2 {
        return Err(Error::Shape(format!("sufficiency data needs columns (x, y), got d = {}", data.d())));
    }
    let s = &data.samples;
    Ok((0..data.n()).map(|i| (s.get2(i, 0), s.get2(i, 1))).unzip())
}

/// Trains the conditional field with `f` held fixed on the first
/// `n − HELD_OUT` rows.
pub fn train_sufficiency_net(demo: &Dataset, f: &dyn Fn(f64) -> f64, cfg: &TrainConfig) -> Result<SufficiencyNet> {
    cfg.validate()?;
    let (xs, ys) = split_xy(demo)?;
    let n_train = demo.n().saturating_sub(HELD_OUT);
    if n_train < 2 {
        return Err(Error::InsufficientData(format!(
            "need more than {} rows, got {}",
            HELD_OUT + 1,
            demo.n()
        )));
    }
    let train = Tensor::new(vec![n_train, 1], xs[..n_train].to_vec())?;
    let mut net = SufficiencyNet {
        net: init_mlp(&[4, cfg.velocity_hidden, 1], OutputActivation::None, derive_seed(cfg.seed, 2))?,
    };
    let mut rng = seeded(derive_seed(cfg.seed, 3));
    let b = cfg.batch_size;
    fit_regression(&mut net.net, cfg, &mut rng, |rng| {
        let ia = random_rows(&train, b, rng);
        let ib = random_rows(&train, b, rng);
        let mut input = Vec::with_capacity(4 * b);
        let mut target = Vec::with_capacity(b);
        for (&i, &j) in ia.iter().zip(&ib) {
            let t = sample_beta(cfg.beta_alpha, rng)?;
            input.extend([t * xs[j] + (1.0 - t) * xs[i], f(ys[j]), ys[i], t]);
            target.push(xs[j] - xs[i]);
        }
        Ok((Tensor::new(vec![b, 4], input)?, Tensor::new(vec![b, 1], target)?))
    })?;
    Ok(net)
}

/// Mean `|v(x_{0.5}, f(y), y, 0.5)|` over the held-out rows, each paired with
/// another held-out row for the midpoint.
pub fn held_out_midpoint_score(
    net: &SufficiencyNet,
    demo: &Dataset,
    f: &dyn Fn(f64) -> f64,
    seed: u64,
) -> Result<f64> {
    let (xs, ys) = split_xy(demo)?;
    let n = demo.n();
    if n < HELD_OUT + 2 {
        return Err(Error::InsufficientData(format!("need more than {} rows, got {n}", HELD_OUT + 1)));
    }
    let start = n - HELD_OUT;
    let mut rng = seeded(derive_seed(seed, 4));
    let mut x_mid = Vec::with_capacity(HELD_OUT);
    for i in start..n {
        let mut j = rng.random_range(start..n);
        while j == i {
            j = rng.random_range(start..n);
        }
        x_mid.push(0.5 * (xs[i] + xs[j]));
    }
    let y = &ys[start..];
    let c: Vec<f64> = y.iter().map(|&v| f(v)).collect();
    let v = net.velocity(&x_mid, &c, y, 0.5)?;
    Ok(v.iter().map(|v| v.abs()).sum::<f64>() / HELD_OUT as f64)
}

/// How far the learned midpoint field is from zero when `f(Y)` stands in for `Y`.
pub fn sufficiency_score(demo: &Dataset, f: &dyn Fn(f64) -> f64, cfg: &TrainConfig) -> Result<f64> {
    let net = train_sufficiency_net(demo, f, cfg)?;
    held_out_midpoint_score(&net, demo, f, cfg.seed)
}
