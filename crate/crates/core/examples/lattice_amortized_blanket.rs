//! One amortized encoder on an 8 × 8 lattice, queried with target pairs it
//! never saw during training.
//!
//! ```text
//! cargo run --release --example lattice_amortized_blanket -- [seed] [iterations]
//! ```

use zeroflow::blanket::{query_blanket, recall, true_blanket, BlanketRule, EDGE_EPS};
use zeroflow::datagen::{generate, GraphSpec, MarginalTransform};
use zeroflow::rng::{derive_seed, seeded};
use zeroflow::trainer::{train, unseen_lattice_pairs, MaskStrategy, TrainConfig};

fn main() -> zeroflow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = TrainConfig {
        seed,
        iterations: args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5000),
        ..TrainConfig::default()
    };
    let side = 8;
    let (theta, data) = generate(&GraphSpec::lattice(side), &MarginalTransform::Gaussian, 2048, seed)?;
    let ckpt = train(&data, &MaskStrategy::lattice(side), &cfg)?.checkpoint;

    let mut rng = seeded(derive_seed(seed, 100));
    let mut total = 0.0;
    let pairs = unseen_lattice_pairs(side, 20, &mut rng)?;
    for [a, b] in &pairs {
        let mut mask = vec![0.0; side * side];
        mask[*a] = 1.0;
        mask[*b] = 1.0;
        let got = query_blanket(&ckpt, &mask, BlanketRule::default())?;
        let truth = true_blanket(&theta, &[*a, *b], EDGE_EPS)?;
        let r = recall(&got.selected, &truth);
        total += r;
        println!("targets {a:>2},{b:>2}: {} selected, recall {r:.2}", got.selected.len());
    }
    println!("mean recall over {} unseen pairs: {:.3}", pairs.len(), total / pairs.len() as f64);
    Ok(())
}
