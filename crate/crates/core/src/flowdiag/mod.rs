//! Checks of the zero-flow theory on fields whose answer is known.

mod diagnostics;
mod field;
mod sufficiency;

pub use diagnostics::{
    antisymmetry_residual, diagnose, euler_integrate, field_norm, midpoint_norm, plane_grid, t_grid,
    transport_error, write_field_1d, write_field_2d, z_grid, DiagnosticsReport, TransportError, EULER_STEPS,
    GRID_HALF_WIDTH, GRID_POINTS,
};
pub use field::{
    analytic_velocity, train_unconditional, AnalyticField, ConstantField, GaussianPair, UncondVelocityNet,
    VelocityField,
};
pub use sufficiency::{
    held_out_midpoint_score, sufficiency_score, train_sufficiency_net, SufficiencyNet, HELD_OUT,
};

/// Mean absolute difference between two fields over `points × times`.
pub fn field_mae(
    a: &dyn VelocityField,
    b: &dyn VelocityField,
    points: &crate::diffcore::Tensor,
    times: &[f64],
) -> crate::Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for &t in times {
        let va = a.velocity(points, t)?;
        let vb = b.velocity(points, t)?;
        total += va.data().iter().zip(vb.data()).map(|(x, y)| (x - y).abs()).sum::<f64>();
        count += va.data().len();
    }
    Ok(total / count.max(1) as f64)
}
