use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use super::dataset::{ColumnScale, Dataset, DatasetMeta};
use super::graph::{GraphSpec, PrecisionMatrix};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng64};

/// Marginal transformation applied to latent Gaussian draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalTransform {
    Gaussian,
    /// `sign(z)|z|^γ`, then per-column standardization.
    Nonparanormal { gamma: f64 },
    /// Latent vector conditioned on every coordinate exceeding `tau`,
    /// sampled by coordinatewise Gibbs. `tau = -∞` disables truncation.
    Truncated {
        #[serde(deserialize_with = "tau_or_neg_inf")]
        tau: f64,
        gibbs_burnin: usize,
        gibbs_thin: usize,
    },
}

fn tau_or_neg_inf<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::NEG_INFINITY))
}

impl MarginalTransform {
    pub const DEFAULT_GAMMA: f64 = 3.0;
    pub const DEFAULT_TAU: f64 = -0.75;
    pub const DEFAULT_BURNIN: usize = 200;
    pub const DEFAULT_THIN: usize = 5;

    pub fn nonparanormal() -> Self {
        Self::Nonparanormal {
            gamma: Self::DEFAULT_GAMMA,
        }
    }

    pub fn truncated() -> Self {
        Self::Truncated {
            tau: Self::DEFAULT_TAU,
            gibbs_burnin: Self::DEFAULT_BURNIN,
            gibbs_thin: Self::DEFAULT_THIN,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MarginalTransform::Gaussian => "gaussian",
            MarginalTransform::Nonparanormal { .. } => "nonparanormal",
            MarginalTransform::Truncated { .. } => "truncated",
        }
    }
}

/// Standard normal CDF.
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub(crate) fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be at least 1".into()));
    }
    Ok(())
}

/// Draws `n` rows from `N(0, Θ⁻¹)`.
///
/// With `Θ = L Lᵀ`, solving `Lᵀ z = ε` for standard normal `ε` gives
/// `Cov(z) = (L Lᵀ)⁻¹ = Σ`.
pub fn sample_gaussian(theta: &PrecisionMatrix, n: usize, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    let l = theta.cholesky()?;
    let lt = l.transpose();
    let d = theta.d();
    let mut rng = seeded(seed);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let eps = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let z = lt
            .solve_upper_triangular(&eps)
            .ok_or(Error::NotPositiveDefinite)?;
        data.extend(z.iter());
    }
    Ok(Dataset {
        samples: Tensor::new(vec![n, d], data)?,
        meta: DatasetMeta {
            source: "gaussian".into(),
            seed: Some(seed),
            ..DatasetMeta::default()
        },
    })
}

/// Per-column standardization to mean 0 and (population) variance 1.
pub(crate) fn standardize_columns(samples: &Tensor) -> Result<(Tensor, Vec<ColumnScale>)> {
    let (n, d) = samples.dims2()?;
    let mut out = samples.data().to_vec();
    let mut scales = Vec::with_capacity(d);
    for j in 0..d {
        let mean = (0..n).map(|i| out[i * d + j]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (out[i * d + j] - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::Degenerate(format!("column {j} has zero variance")));
        }
        for i in 0..n {
            out[i * d + j] = (out[i * d + j] - mean) / std;
        }
        scales.push(ColumnScale { mean, std });
    }
    Ok((Tensor::new(vec![n, d], out)?, scales))
}

/// Signed power `sign(z)|z|^γ` followed by column standardization.
pub fn nonparanormal_transform(data: &Dataset, gamma: f64) -> Result<Dataset> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    let powered = data.samples.map(|z| z.signum() * z.abs().powf(gamma));
    if !powered.all_finite() {
        return Err(Error::Numeric("signed power overflowed".into()));
    }
    let (samples, scales) = standardize_columns(&powered)?;
    let mut meta = data.meta.clone();
    meta.transform = Some(MarginalTransform::Nonparanormal { gamma });
    meta.standardization = Some(scales);
    Ok(Dataset { samples, meta })
}

/// Draw from a standard normal restricted to `(lower, ∞)` by inverting the CDF.
///
/// Works in upper-tail space so that `lower` far in the right tail stays accurate.
pub(crate) fn truncated_standard_normal(lower: f64, rng: &mut Rng64) -> f64 {
    let tail = norm_cdf(-lower);
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let x = -norm_quantile(u * tail);
    if x > lower {
        x
    } else {
        lower.next_up()
    }
}

/// Gibbs sampler for `N(0, Θ⁻¹)` restricted to the orthant `{z_i > τ ∀i}`.
///
/// Each full conditional is `N(−Σ_{j≠i} Θ_ij z_j / Θ_ii, 1/Θ_ii)` truncated
/// below at `τ`. After `burnin` sweeps, every `thin`-th sweep is kept.
pub fn sample_truncated(
    theta: &PrecisionMatrix,
    tau: f64,
    n: usize,
    burnin: usize,
    thin: usize,
    seed: u64,
) -> Result<Dataset> {
    check_n(n)?;
    if thin == 0 {
        return Err(Error::Parameter("gibbs thinning must be at least 1".into()));
    }
    if tau.is_nan() || tau == f64::INFINITY {
        return Err(Error::Parameter(format!("truncation threshold must be below +∞, got {tau}")));
    }
    theta.cholesky()?;
    let d = theta.d();
    let neighbors: Vec<Vec<(usize, f64)>> = (0..d)
        .map(|i| {
            (0..d)
                .filter(|&j| j != i && theta.get(i, j) != 0.0)
                .map(|j| (j, theta.get(i, j)))
                .collect()
        })
        .collect();
    let diag: Vec<f64> = (0..d).map(|i| theta.get(i, i)).collect();

    let mut rng = seeded(seed);
    let start = if tau.is_finite() { tau.max(0.0) + 0.5 } else { 0.0 };
    let mut z = vec![start; d];
    let sweep = |z: &mut [f64], rng: &mut Rng64| {
        for i in 0..d {
            let dot: f64 = neighbors[i].iter().map(|&(j, w)| w * z[j]).sum();
            let mean = -dot / diag[i];
            let sd = diag[i].sqrt().recip();
            let lower = (tau - mean) / sd;
            let mut v = mean + sd * truncated_standard_normal(lower, rng);
            if v <= tau {
                v = tau.next_up();
            }
            z[i] = v;
        }
    };

    for _ in 0..burnin {
        sweep(&mut z, &mut rng);
    }
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for _ in 0..thin {
            sweep(&mut z, &mut rng);
        }
        data.extend_from_slice(&z);
    }
    Ok(Dataset {
        samples: Tensor::new(vec![n, d], data)?,
        meta: DatasetMeta {
            source: "gaussian".into(),
            seed: Some(seed),
            transform: Some(MarginalTransform::Truncated {
                tau,
                gibbs_burnin: burnin,
                gibbs_thin: thin,
            }),
            ..DatasetMeta::default()
        },
    })
}

/// Samples a graphical-model dataset: latent Gaussian from `spec`, then `transform`.
pub fn generate(spec: &GraphSpec, transform: &MarginalTransform, n: usize, seed: u64) -> Result<(PrecisionMatrix, Dataset)> {
    let theta = spec.build()?;
    let mut ds = match transform {
        MarginalTransform::Gaussian => sample_gaussian(&theta, n, seed)?,
        MarginalTransform::Nonparanormal { gamma } => {
            nonparanormal_transform(&sample_gaussian(&theta, n, seed)?, *gamma)?
        }
        MarginalTransform::Truncated {
            tau,
            gibbs_burnin,
            gibbs_thin,
        } => sample_truncated(&theta, *tau, n, *gibbs_burnin, *gibbs_thin, seed)?,
    };
    ds.meta.graph = Some(spec.clone());
    ds.meta.transform = Some(transform.clone());
    Ok((theta, ds))
}

/// `Y ~ N(0,1)`, `X = 0.5·Y + noise_scale·N(0,1)`; columns `(x, y)`.
pub fn conditional_demo_data_with_noise(n: usize, seed: u64, noise_scale: f64) -> Result<Dataset> {
    check_n(n)?;
    let mut rng = seeded(seed);
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let y: f64 = rng.sample(StandardNormal);
        let eps: f64 = rng.sample(StandardNormal);
        data.push(0.5 * y + noise_scale * eps);
        data.push(y);
    }
    Ok(Dataset {
        samples: Tensor::new(vec![n, 2], data)?,
        meta: DatasetMeta {
            source: "conditional_demo".into(),
            seed: Some(seed),
            column_names: Some(vec!["x".into(), "y".into()]),
            notes: vec![format!("y ~ N(0,1); x = 0.5*y + {noise_scale}*N(0,1)")],
            ..DatasetMeta::default()
        },
    })
}

/// The two-variable demo: `X = 0.5·Y + N(0,1)` with `Y ~ N(0,1)`.
pub fn conditional_demo_data(n: usize, seed: u64) -> Result<Dataset> {
    conditional_demo_data_with_noise(n, seed, 1.0)
}

pub const MIXTURE_CENTER: f64 = 1.5;
pub const MIXTURE_STD: f64 = 0.3;

/// Equal-weight mixture of four isotropic Gaussians at `(±1.5, ±1.5)`.
pub fn mixture2d(n: usize, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    let mut rng = seeded(seed);
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let k: u8 = rng.random_range(0..4);
        let cx = if k & 1 == 0 { -MIXTURE_CENTER } else { MIXTURE_CENTER };
        let cy = if k & 2 == 0 { -MIXTURE_CENTER } else { MIXTURE_CENTER };
        let ex: f64 = rng.sample(StandardNormal);
        let ey: f64 = rng.sample(StandardNormal);
        data.push(cx + MIXTURE_STD * ex);
        data.push(cy + MIXTURE_STD * ey);
    }
    Ok(Dataset {
        samples: Tensor::new(vec![n, 2], data)?,
        meta: DatasetMeta {
            source: "mixture2d".into(),
            seed: Some(seed),
            column_names: Some(vec!["x".into(), "y".into()]),
            notes: vec![format!(
                "4 equal-weight components at (±{MIXTURE_CENTER}, ±{MIXTURE_CENTER}), std {MIXTURE_STD}"
            )],
            ..DatasetMeta::default()
        },
    })
}

/// `n` rows of `N(mean, std²)` in `d` independent coordinates.
pub fn isotropic_gaussian(n: usize, d: usize, mean: f64, std: f64, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    let mut rng = seeded(seed);
    let data = (0..n * d)
        .map(|_| mean + std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(Dataset {
        samples: Tensor::new(vec![n, d], data)?,
        meta: DatasetMeta {
            source: format!("isotropic N({mean}, {std}^2)"),
            seed: Some(seed),
            ..DatasetMeta::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(ds: &Dataset, j: usize) -> Vec<f64> {
        let (n, _) = ds.samples.dims2().unwrap();
        (0..n).map(|i| ds.samples.get2(i, j)).collect()
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn var(v: &[f64]) -> f64 {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    fn scalar_precision(v: f64) -> PrecisionMatrix {
        PrecisionMatrix::new(Tensor::new(vec![1, 1], vec![v]).unwrap()).unwrap()
    }

    #[test]
    fn one_dimensional_variance_is_inverse_precision() {
        let n = 100_000;
        let ds = sample_gaussian(&scalar_precision(4.0), n, 3).unwrap();
        let v = var(&col(&ds, 0));
        // SE of a sample variance: σ²·sqrt(2/(n−1)).
        let se = 0.25 * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((v - 0.25).abs() < 3.0 * se, "{v}");
    }

    #[test]
    fn identity_precision_gives_identity_covariance_and_zero_mean() {
        let d = 4;
        let theta = PrecisionMatrix::new(Tensor::identity(d)).unwrap();
        let n = 20_000;
        let ds = sample_gaussian(&theta, n, 11).unwrap();
        for j in 0..d {
            let c = col(&ds, j);
            assert!(mean(&c).abs() < 4.0 / (n as f64).sqrt());
            assert!((var(&c) - 1.0).abs() < 0.05);
            for k in 0..j {
                let ck = col(&ds, k);
                let cov = c.iter().zip(&ck).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                assert!(cov.abs() < 0.05);
            }
        }
    }

    #[test]
    fn empirical_precision_matches_theta() {
        let theta = GraphSpec::chain(8, vec![0.8, 0.4]).build().unwrap();
        let n = 10_000;
        let ds = sample_gaussian(&theta, n, 5).unwrap();
        let d = theta.d();
        let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
        for i in 0..n {
            let r = nalgebra::DVector::from_row_slice(ds.samples.row(i));
            cov += &r * r.transpose();
        }
        cov /= n as f64;
        let prec = cov.try_inverse().unwrap();
        for i in 0..d {
            for j in 0..d {
                assert!((prec[(i, j)] - theta.get(i, j)).abs() < 0.15, "({i},{j})");
            }
        }
    }

    #[test]
    fn generators_are_bit_reproducible() {
        let spec = GraphSpec::chain(10, vec![0.8, 0.4, 0.2]);
        for t in [MarginalTransform::Gaussian, MarginalTransform::nonparanormal(), MarginalTransform::truncated()] {
            let (_, a) = generate(&spec, &t, 50, 9).unwrap();
            let (_, b) = generate(&spec, &t, 50, 9).unwrap();
            assert_eq!(a.samples, b.samples);
        }
        assert_eq!(mixture2d(30, 1).unwrap().samples, mixture2d(30, 1).unwrap().samples);
    }

    #[test]
    fn nonparanormal_fixes_zero_preserves_rank_and_standardizes() {
        let base = Dataset {
            samples: Tensor::new(vec![5, 1], vec![-2.0, -0.5, 0.0, 0.3, 1.5]).unwrap(),
            meta: DatasetMeta::default(),
        };
        let powered = base.samples.map(|z| z.signum() * z.abs().powf(3.0));
        assert_eq!(powered.data()[2], 0.0);
        let out = nonparanormal_transform(&base, 3.0).unwrap();
        let c = col(&out, 0);
        assert!(c.windows(2).all(|w| w[0] < w[1]));

        let spec = GraphSpec::chain(6, vec![0.8]);
        let (_, ds) = generate(&spec, &MarginalTransform::nonparanormal(), 500, 2).unwrap();
        for j in 0..6 {
            let c = col(&ds, j);
            let m = mean(&c);
            let pop_var = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / c.len() as f64;
            assert!(m.abs() < 1e-10);
            assert!((pop_var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_column_is_degenerate() {
        let base = Dataset {
            samples: Tensor::new(vec![3, 1], vec![2.0, 2.0, 2.0]).unwrap(),
            meta: DatasetMeta::default(),
        };
        assert!(matches!(nonparanormal_transform(&base, 3.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn truncated_samples_respect_threshold() {
        let theta = GraphSpec::chain(12, vec![0.8, 0.4, 0.2]).build().unwrap();
        let ds = sample_truncated(&theta, -0.75, 400, 50, 2, 4).unwrap();
        assert!(ds.samples.data().iter().all(|&z| z > -0.75));
        // Far right-tail truncation still lands strictly above τ.
        let far = sample_truncated(&scalar_precision(1.0), 8.0, 200, 5, 1, 4).unwrap();
        assert!(far.samples.data().iter().all(|&z| z > 8.0 && z < 10.0));
    }

    #[test]
    fn half_normal_mean() {
        let n = 40_000;
        let ds = sample_truncated(&scalar_precision(1.0), 0.0, n, 10, 1, 8).unwrap();
        let c = col(&ds, 0);
        let expect = (2.0 / std::f64::consts::PI).sqrt();
        // Var of a half-normal: 1 − 2/π.
        let se = ((1.0 - 2.0 / std::f64::consts::PI) / n as f64).sqrt();
        assert!((mean(&c) - expect).abs() < 3.0 * se, "{}", mean(&c));
    }

    #[test]
    fn untruncated_gibbs_matches_direct_sampling() {
        let theta = GraphSpec::chain(4, vec![0.8, 0.4]).build().unwrap();
        let n = 20_000;
        let gibbs = sample_truncated(&theta, f64::NEG_INFINITY, n, 100, 3, 21).unwrap();
        let direct = sample_gaussian(&theta, n, 22).unwrap();
        for j in 0..4 {
            let (a, b) = (col(&gibbs, j), col(&direct, j));
            assert!((mean(&a) - mean(&b)).abs() < 0.05);
            for k in 0..=j {
                let (ak, bk) = (col(&gibbs, k), col(&direct, k));
                let cov = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / n as f64;
                assert!((cov(&a, &ak) - cov(&b, &bk)).abs() < 0.06, "cov({j},{k})");
            }
        }
    }

    #[test]
    fn conditional_demo_slope_and_variance() {
        let n = 20_000;
        let ds = conditional_demo_data(n, 1).unwrap();
        let (x, y) = (col(&ds, 0), col(&ds, 1));
        let (mx, my) = (mean(&x), mean(&y));
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let slope = sxy / syy;
        // SE of the slope: σ_noise / sqrt(Σ(y−ȳ)²).
        assert!((slope - 0.5).abs() < 3.0 / syy.sqrt(), "{slope}");
        assert!((var(&x) - 1.25).abs() < 3.0 * 1.25 * (2.0 / n as f64).sqrt());

        let exact = conditional_demo_data_with_noise(100, 1, 0.0).unwrap();
        for i in 0..100 {
            assert_eq!(exact.samples.get2(i, 0), 0.5 * exact.samples.get2(i, 1));
        }
    }

    #[test]
    fn mixture_components_balance_and_spread() {
        let n = 40_000;
        let ds = mixture2d(n, 3).unwrap();
        let mut counts = [0usize; 4];
        let mut within = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for i in 0..n {
            let (x, y) = (ds.samples.get2(i, 0), ds.samples.get2(i, 1));
            let k = usize::from(x > 0.0) + 2 * usize::from(y > 0.0);
            counts[k] += 1;
            within[k].push(x - MIXTURE_CENTER.copysign(x));
        }
        let se = (0.25 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 3.0 * se);
        }
        assert!(mean(&col(&ds, 0)).abs() < 0.05 && mean(&col(&ds, 1)).abs() < 0.05);
        for w in &within {
            assert!((var(w).sqrt() - 0.3).abs() < 0.01);
        }
    }
}
