//! Is `f(Y)` a sufficient statistic of `Y` for predicting `X = Y/2 + noise`?
//!
//! ```text
//! cargo run --release --example sufficiency_demo -- [iterations]
//! ```

use std::time::Instant;

use zeroflow::datagen::conditional_demo_data;
use zeroflow::flowdiag::sufficiency_score;
use zeroflow::trainer::TrainConfig;

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn main() -> zeroflow::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let cfg = TrainConfig {
        iterations,
        ..TrainConfig::default()
    };
    let demo = conditional_demo_data(2048, 0)?;

    let candidates: [(&str, fn(f64) -> f64); 3] = [
        ("identity", |y| y),
        ("sigmoid(-2y)", |y| sigmoid(-2.0 * y)),
        ("sin(2y)", |y| (2.0 * y).sin()),
    ];
    let mut scores = Vec::new();
    for (name, f) in candidates {
        let start = Instant::now();
        let s = sufficiency_score(&demo, &f, &cfg)?;
        println!("{name:<14} midpoint score {s:.4}  ({:.1}s)", start.elapsed().as_secs_f64());
        scores.push(s);
    }
    println!("sin / sigmoid ratio {:.2}", scores[2] / scores[1]);
    Ok(())
}
