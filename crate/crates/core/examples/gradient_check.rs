//! Finite-difference check of the full training objective on a tiny problem.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use zeroflow::diffcore::{grad_check, Tensor};
use zeroflow::models::{AmortizedGateEncoder, Encoder, EncoderVars, MlpVars, VelocityNet};
use zeroflow::rng::seeded;
use zeroflow::trainer::{make_batch, objective_on_tape, sample_masks, MaskStrategy, TrainConfig, ZfMode};

fn main() -> zeroflow::Result<()> {
    let d = 4;
    let data = zeroflow::datagen::isotropic_gaussian(64, d, 0.0, 1.0, 1)?;
    let mut rng = seeded(2);
    let masks = sample_masks(&MaskStrategy::Bernoulli { p: 0.4 }, 8, d, &mut rng)?;
    let batch = make_batch(&data, &masks, 4.0, &mut rng)?;

    let encoder = Encoder::Amortized(AmortizedGateEncoder::new(d, 8, 3)?);
    let vnet = VelocityNet::new(d, 12, 4)?;
    let mut params: Vec<Tensor> = encoder.params();
    let n_enc = params.len();
    params.extend(vnet.net.params());
    let count: usize = params.iter().map(Tensor::numel).sum();

    for mode in [ZfMode::Midpoint, ZfMode::Kernel] {
        let cfg = TrainConfig {
            zf_mode: mode,
            omega_bandwidth: 0.2,
            lambda_sparsity: 0.05,
            ..TrainConfig::default()
        };
        let err = grad_check(
            |tape, vars| {
                let ev = EncoderVars::Amortized(MlpVars::from_flat(&vars[..n_enc]));
                let vv = MlpVars::from_flat(&vars[n_enc..]);
                Ok(objective_on_tape(tape, &encoder, &ev, &vnet, &vv, &batch, &cfg)?.total)
            },
            &params,
            1e-5,
        )?;
        println!("{mode:?}: max relative error {err:.2e} over {count} parameters");
    }
    Ok(())
}
