//! A 2-D Gaussian mixture flowing onto itself stalls at the midpoint.
//!
//! ```text
//! cargo run --release --example zero_flow_mixture -- [out_dir]
//! ```

use zeroflow::datagen::mixture2d;
use zeroflow::flowdiag::{field_norm, midpoint_norm, plane_grid, train_unconditional, write_field_2d};
use zeroflow::trainer::TrainConfig;

fn main() -> zeroflow::Result<()> {
    let cfg = TrainConfig::default();
    let p = mixture2d(2048, 1)?;
    let q = mixture2d(2048, 2)?;
    let net = train_unconditional(&p, &q, &cfg)?;

    let eval = mixture2d(1024, 3)?.samples;
    let early = field_norm(&net, &eval, 0.1)?;
    let mid = midpoint_norm(&net, &eval)?;
    println!("mean speed at t = 0.1: {early:.4}");
    println!("mean speed at t = 0.5: {mid:.4}  ({:.1}% of t = 0.1)", 100.0 * mid / early);

    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir).map_err(|e| zeroflow::Error::io(&dir, e))?;
        let grid = plane_grid(21, 2.5)?;
        write_field_2d(format!("{dir}/field_mixture.csv"), &net, &grid, &[0.1, 0.3, 0.5, 0.7, 0.9])?;
        println!("wrote {dir}/field_mixture.csv");
    }
    Ok(())
}
