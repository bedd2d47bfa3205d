//! Rectified flow between 1-D Gaussians, checked against the closed-form field.
//!
//! ```text
//! cargo run --release --example zero_flow_1d -- [out_dir]
//! ```

use std::time::Instant;

use zeroflow::datagen::isotropic_gaussian;
use zeroflow::flowdiag::{
    antisymmetry_residual, euler_integrate, field_mae, midpoint_norm, t_grid, train_unconditional,
    transport_error, write_field_1d, z_grid, AnalyticField, GaussianPair, EULER_STEPS,
};
use zeroflow::trainer::TrainConfig;

fn main() -> zeroflow::Result<()> {
    let out_dir = std::env::args().nth(1);
    let cfg = TrainConfig::default();
    let (z, ts) = (z_grid(), t_grid());
    let source = isotropic_gaussian(2048, 1, 0.0, 1.0, 10)?;

    let mut norms = Vec::new();
    for (label, mu1) in [("equal", 0.0), ("shifted", 1.0)] {
        let start = Instant::now();
        let target = isotropic_gaussian(2048, 1, mu1, 1.0, 11)?;
        let net = train_unconditional(&source, &target, &cfg)?;
        let oracle = AnalyticField {
            pair: GaussianPair::new(0.0, 1.0, mu1, 1.0)?,
            d: 1,
        };
        let mid = midpoint_norm(&net, &z)?;
        println!("N(0,1) -> N({mu1},1), trained in {:.1}s", start.elapsed().as_secs_f64());
        println!("  MAE vs oracle over grid   {:.4}", field_mae(&net, &oracle, &z, &ts)?);
        println!("  midpoint norm             {mid:.4}  (oracle {:.4})", midpoint_norm(&oracle, &z)?);
        println!("  antisymmetry residual     {:.4}", antisymmetry_residual(&net, &z, &ts)?);
        norms.push(mid);
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir).map_err(|e| zeroflow::Error::io(dir, e))?;
            write_field_1d(format!("{dir}/field_{label}.csv"), &net, &z, &ts)?;
        }
    }
    println!("shifted / equal midpoint norm: {:.1}x", norms[1] / norms[0]);

    let x0 = isotropic_gaussian(4096, 1, 0.0, 1.0, 12)?.samples;
    let oracle = AnalyticField {
        pair: GaussianPair::new(0.0, 1.0, 1.0, 1.0)?,
        d: 1,
    };
    let err = transport_error(&euler_integrate(&oracle, &x0, EULER_STEPS)?, 1.0, 1.0)?;
    println!(
        "oracle transport to N(1,1): mean error {:.4}, variance error {:.4}",
        err.mean_err, err.var_err
    );
    Ok(())
}
