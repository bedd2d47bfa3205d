use rand::Rng;
use rand_distr::StandardNormal;

use crate::datagen::Dataset;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng64;

pub const T_CLAMP: f64 = 1e-6;

/// One training batch under independent coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub x: Tensor,
    pub y: Tensor,
    pub xp: Tensor,
    pub yp: Tensor,
    pub m: Tensor,
    /// `[n]`.
    pub t: Tensor,
    pub x_t: Tensor,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Assembles a batch from explicit rows, masks and times.
    pub fn from_parts(z1: &Tensor, z2: &Tensor, m: &Tensor, t: &Tensor) -> Result<Self> {
        let (n, _) = z1.dims2()?;
        z1.expect_same_shape(z2)?;
        z1.expect_same_shape(m)?;
        if t.numel() != n {
            return Err(Error::Shape(format!("{} times for {n} rows", t.numel())));
        }
        let tv = t.data();
        let split = |z: &Tensor, keep: f64| z.zip_map(m, |v, mk| if mk == keep { v } else { 0.0 });
        let x = split(z1, 1.0)?;
        let y = split(z1, 0.0)?;
        let xp = split(z2, 1.0)?;
        let yp = split(z2, 0.0)?;
        let x_t = interpolate(&x, &xp, tv)?;
        Ok(Self {
            x,
            y,
            xp,
            yp,
            m: m.clone(),
            t: Tensor::vector(tv.to_vec())?,
            x_t,
        })
    }
}

/// Row-wise `t_i·xp_i + (1−t_i)·x_i`.
pub fn interpolate(x: &Tensor, xp: &Tensor, t: &[f64]) -> Result<Tensor> {
    let (n, d) = x.dims2()?;
    x.expect_same_shape(xp)?;
    if t.len() != n {
        return Err(Error::Shape(format!("{} times for {n} rows", t.len())));
    }
    let data = (0..n * d)
        .map(|k| {
            let ti = t[k / d];
            ti * xp.data()[k] + (1.0 - ti) * x.data()[k]
        })
        .collect();
    Tensor::new(vec![n, d], data)
}

/// `Gamma(shape, 1)` by the Marsaglia–Tsang squeeze method.
fn sample_gamma(shape: f64, rng: &mut Rng64) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.random();
        return sample_gamma(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        if u < 1.0 - 0.0331 * x.powi(4) || u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// `t ~ Beta(α, α)` as `G₁/(G₁+G₂)`, clamped to `[1e-6, 1−1e-6]`.
pub fn sample_beta(alpha: f64, rng: &mut Rng64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("beta alpha must be positive, got {alpha}")));
    }
    let a = sample_gamma(alpha, rng);
    let b = sample_gamma(alpha, rng);
    let t = if a + b > 0.0 { a / (a + b) } else { 0.5 };
    Ok(t.clamp(T_CLAMP, 1.0 - T_CLAMP))
}

/// Midpoint kernel `exp(−|t−0.5|/b)`.
pub fn omega(t: f64, b: f64) -> f64 {
    (-(t - 0.5).abs() / b).exp()
}

/// Draws `masks.rows()` pairs of independent rows (no row paired with itself)
/// and splits them with the masks.
pub fn make_batch(data: &Dataset, masks: &Tensor, t_alpha: f64, rng: &mut Rng64) -> Result<Batch> {
    let (n_rows, d) = data.samples.dims2()?;
    let (n, md) = masks.dims2()?;
    if md != d {
        return Err(Error::Shape(format!("mask width {md} for data width {d}")));
    }
    if n_rows < 2 {
        return Err(Error::InsufficientData(format!(
            "independent pairs need at least 2 rows, got {n_rows}"
        )));
    }
    let mut z1 = Vec::with_capacity(n * d);
    let mut z2 = Vec::with_capacity(n * d);
    let mut t = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.random_range(0..n_rows);
        let b = loop {
            let b = rng.random_range(0..n_rows);
            if b != a {
                break b;
            }
        };
        z1.extend_from_slice(data.samples.row(a));
        z2.extend_from_slice(data.samples.row(b));
        t.push(sample_beta(t_alpha, rng)?);
    }
    Batch::from_parts(
        &Tensor::new(vec![n, d], z1)?,
        &Tensor::new(vec![n, d], z2)?,
        masks,
        &Tensor::vector(t)?,
    )
}
