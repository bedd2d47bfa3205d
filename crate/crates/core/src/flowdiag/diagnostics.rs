use std::path::Path;

use serde::{Deserialize, Serialize};

use super::field::{check_points, VelocityField};
use crate::datagen::fmt_f64;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 81;
pub const GRID_HALF_WIDTH: f64 = 2.0;
pub const EULER_STEPS: usize = 100;

/// 81 uniform points on `[−2, 2]` as a `[81 × 1]` column.
pub fn z_grid() -> Tensor {
    let step = 2.0 * GRID_HALF_WIDTH / (GRID_POINTS - 1) as f64;
    let data = (0..GRID_POINTS).map(|i| -GRID_HALF_WIDTH + step * i as f64).collect();
    Tensor::new(vec![GRID_POINTS, 1], data).expect("grid is finite")
}

/// `{0.1, 0.2, …, 0.9}`.
pub fn t_grid() -> Vec<f64> {
    (1..=9).map(|k| f64::from(k) / 10.0).collect()
}

/// A `side × side` grid over `[−half, half]²` as `[side² × 2]`.
pub fn plane_grid(side: usize, half: f64) -> Result<Tensor> {
    if side < 2 {
        return Err(Error::Parameter(format!("plane grid needs side ≥ 2, got {side}")));
    }
    let step = 2.0 * half / (side - 1) as f64;
    let mut data = Vec::with_capacity(side * side * 2);
    for i in 0..side {
        for j in 0..side {
            data.push(-half + step * j as f64);
            data.push(-half + step * i as f64);
        }
    }
    Tensor::new(vec![side * side, 2], data)
}

fn row_norms(v: &Tensor) -> Vec<f64> {
    (0..v.rows()).map(|i| v.row(i).iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Mean `‖v_t(z)‖` over the points at time `t`.
pub fn field_norm(field: &dyn VelocityField, points: &Tensor, t: f64) -> Result<f64> {
    Ok(mean(&row_norms(&field.velocity(points, t)?)))
}

/// Mean `‖v_{0.5}(z)‖` over the points.
pub fn midpoint_norm(field: &dyn VelocityField, points: &Tensor) -> Result<f64> {
    field_norm(field, points, 0.5)
}

/// Mean `‖v_t(z) + v_{1−t}(z)‖` over points × times.
pub fn antisymmetry_residual(field: &dyn VelocityField, points: &Tensor, t_grid: &[f64]) -> Result<f64> {
    if t_grid.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::Parameter("antisymmetry times must lie in (0, 1)".into()));
    }
    let mut all = Vec::with_capacity(points.rows() * t_grid.len());
    for &t in t_grid {
        let a = field.velocity(points, t)?;
        let b = field.velocity(points, 1.0 - t)?;
        all.extend(row_norms(&a.zip_map(&b, |x, y| x + y)?));
    }
    Ok(mean(&all))
}

/// Forward Euler for `dX = v_t(X) dt` on `[0, 1]` with `steps` equal steps.
pub fn euler_integrate(field: &dyn VelocityField, x0: &Tensor, steps: usize) -> Result<Tensor> {
    if steps == 0 {
        return Err(Error::Parameter("euler needs at least one step".into()));
    }
    check_points(x0, field.dim())?;
    let h = 1.0 / steps as f64;
    let mut x = x0.clone();
    for k in 0..steps {
        let v = field.velocity(&x, k as f64 * h)?;
        x = x.zip_map(&v, |a, b| a + h * b)?;
        if !x.all_finite() {
            return Err(Error::Numeric(format!("euler state became non-finite at step {k}")));
        }
    }
    Ok(x)
}

/// Absolute errors of the first two moments after transport, averaged over coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportError {
    pub mean_err: f64,
    pub var_err: f64,
}

pub fn transport_error(x1: &Tensor, target_mean: f64, target_var: f64) -> Result<TransportError> {
    let (n, d) = x1.dims2()?;
    let (mut me, mut ve) = (0.0, 0.0);
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|i| x1.get2(i, j)).collect();
        let m = mean(&col);
        let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
        me += (m - target_mean).abs();
        ve += (v - target_var).abs();
    }
    Ok(TransportError {
        mean_err: me / d as f64,
        var_err: ve / d as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub midpoint_norm: f64,
    pub antisymmetry_residual: f64,
    pub transport_error: TransportError,
    pub notes: Vec<String>,
}

/// Runs the three checks on the standard grids; transport starts from
/// `x0` and is compared with the target moments.
pub fn diagnose(
    field: &dyn VelocityField,
    points: &Tensor,
    x0: &Tensor,
    target_mean: f64,
    target_var: f64,
) -> Result<DiagnosticsReport> {
    let x1 = euler_integrate(field, x0, EULER_STEPS)?;
    Ok(DiagnosticsReport {
        midpoint_norm: midpoint_norm(field, points)?,
        antisymmetry_residual: antisymmetry_residual(field, points, &t_grid())?,
        transport_error: transport_error(&x1, target_mean, target_var)?,
        notes: vec![format!(
            "{} eval points, t in {:?}, {EULER_STEPS} euler steps from {} samples",
            points.rows(),
            t_grid(),
            x0.rows()
        )],
    })
}

/// Writes `z,t,v` rows for a 1-D field over `points × times`.
pub fn write_field_1d(path: impl AsRef<Path>, field: &dyn VelocityField, points: &Tensor, times: &[f64]) -> Result<()> {
    let path = path.as_ref();
    if field.dim() != 1 {
        return Err(Error::Shape(format!("1-D dump of a {}-D field", field.dim())));
    }
    let mut out = String::from("z,t,v\n");
    for &t in times {
        let v = field.velocity(points, t)?;
        for i in 0..points.rows() {
            out.push_str(&format!("{},{},{}\n", fmt_f64(points.get2(i, 0)), fmt_f64(t), fmt_f64(v.get2(i, 0))));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `x,y,t,vx,vy` rows for a 2-D field over `points × times`.
pub fn write_field_2d(path: impl AsRef<Path>, field: &dyn VelocityField, points: &Tensor, times: &[f64]) -> Result<()> {
    let path = path.as_ref();
    if field.dim() != 2 {
        return Err(Error::Shape(format!("2-D dump of a {}-D field", field.dim())));
    }
    let mut out = String::from("x,y,t,vx,vy\n");
    for &t in times {
        let v = field.velocity(points, t)?;
        for i in 0..points.rows() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(points.get2(i, 0)),
                fmt_f64(points.get2(i, 1)),
                fmt_f64(t),
                fmt_f64(v.get2(i, 0)),
                fmt_f64(v.get2(i, 1))
            ));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
