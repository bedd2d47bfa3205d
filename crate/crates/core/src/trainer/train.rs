use std::path::Path;

use serde::{Deserialize, Serialize};

use super::batch::make_batch;
use super::config::{EncoderKind, TrainConfig};
use super::loss::{objective_on_tape, LossBreakdown};
use super::masks::{sample_masks, MaskStrategy};
use crate::datagen::{fmt_f64, Dataset};
use crate::diffcore::{adam_step, AdamState, Tape, Tensor};
use crate::error::{Error, Result};
use crate::models::{AmortizedGateEncoder, Checkpoint, CheckpointMeta, Encoder, FixedGateEncoder, VelocityNet, FORMAT_VERSION};
use crate::rng::{derive_seed, seeded};

/// Loss history cadence, in iterations.
pub const LOG_EVERY: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iter: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub history: Vec<LossRecord>,
}

fn init_encoder(kind: EncoderKind, d: usize, hidden: usize, seed: u64) -> Result<Encoder> {
    Ok(match kind {
        EncoderKind::Amortized => Encoder::Amortized(AmortizedGateEncoder::new(d, hidden, seed)?),
        EncoderKind::Fixed => Encoder::Fixed(FixedGateEncoder::new(d)),
    })
}

/// Jointly fits the gate encoder and the conditional velocity field.
///
/// Deterministic in `(data, strategy, cfg)`. History holds iteration 0,
/// every [`LOG_EVERY`]-th iteration and the final one.
pub fn train(data: &Dataset, strategy: &MaskStrategy, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with_observer(data, strategy, cfg, |_| {})
}

/// [`train`] with a callback invoked on every logged record.
pub fn train_with_observer(
    data: &Dataset,
    strategy: &MaskStrategy,
    cfg: &TrainConfig,
    mut observe: impl FnMut(&LossRecord),
) -> Result<TrainOutput> {
    cfg.validate()?;
    let d = data.d();
    strategy.validate(d)?;
    if data.n() < 2 {
        return Err(Error::InsufficientData(format!("training needs at least 2 rows, got {}", data.n())));
    }

    let mut encoder = init_encoder(cfg.encoder, d, cfg.encoder_hidden, derive_seed(cfg.seed, 1))?;
    let mut vnet = VelocityNet::new(d, cfg.velocity_hidden, derive_seed(cfg.seed, 2))?;
    let mut rng = seeded(derive_seed(cfg.seed, 3));

    let mut enc_params = encoder.params();
    let mut vel_params = vnet.net.params();
    let n_enc = enc_params.len();
    let mut params: Vec<Tensor> = enc_params.drain(..).chain(vel_params.drain(..)).collect();
    let mut adam = AdamState::new(&params, cfg.lr, cfg.weight_decay);

    let mut history = Vec::with_capacity(cfg.iterations / LOG_EVERY + 2);
    for iter in 0..cfg.iterations {
        let masks = sample_masks(strategy, cfg.batch_size, d, &mut rng)?;
        let batch = make_batch(data, &masks, cfg.beta_alpha, &mut rng)?;

        let mut tape = Tape::new();
        let enc_vars = encoder.register(&mut tape);
        let vel_vars = vnet.register(&mut tape);
        let obj = objective_on_tape(&mut tape, &encoder, &enc_vars, &vnet, &vel_vars, &batch, cfg)?;
        let loss = obj.breakdown(&tape);
        if !loss.total.is_finite() {
            return Err(Error::Numeric(format!("loss became {} at iteration {iter}", loss.total)));
        }
        if iter % LOG_EVERY == 0 || iter + 1 == cfg.iterations {
            let record = LossRecord { iter, loss };
            observe(&record);
            history.push(record);
        }

        let grads = tape.backward(obj.total)?;
        let vars = enc_vars.all().into_iter().chain(vel_vars.all());
        let grads: Vec<Tensor> = vars
            .zip(&params)
            .map(|(v, p)| grads.get_or_zeros(v, p.shape()))
            .collect();
        adam_step(&mut params, &grads, &mut adam)
            .map_err(|e| Error::Numeric(format!("iteration {iter}: {e}")))?;
        encoder.set_params(&params[..n_enc])?;
        vnet.net.set_params(&params[n_enc..])?;
    }

    let checkpoint = Checkpoint {
        format_version: FORMAT_VERSION,
        d,
        seed: cfg.seed,
        train_config: cfg.clone(),
        encoder,
        velocity: vnet,
        meta: CheckpointMeta {
            mask_kind: strategy.to_string(),
            feature_names: data.meta.column_names.clone(),
            trained_on: data.meta.source.clone(),
        },
    };
    checkpoint.validate()?;
    Ok(TrainOutput { checkpoint, history })
}

/// Writes `iter,rf,zf,sparsity,total`.
pub fn write_loss_csv(path: impl AsRef<Path>, history: &[LossRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("iter,rf,zf,sparsity,total\n");
    for r in history {
        let l = r.loss;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iter,
            fmt_f64(l.rf),
            fmt_f64(l.zf),
            fmt_f64(l.sparsity),
            fmt_f64(l.total)
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GraphSpec, MarginalTransform};

    fn tiny_cfg(iterations: usize) -> TrainConfig {
        TrainConfig {
            iterations,
            batch_size: 32,
            encoder_hidden: 8,
            velocity_hidden: 16,
            lr: 1e-3,
            seed: 4,
            ..TrainConfig::default()
        }
    }

    fn tiny_data() -> Dataset {
        generate(&GraphSpec::chain(6, vec![0.8]), &MarginalTransform::Gaussian, 64, 1).unwrap().1
    }

    #[test]
    fn same_seed_gives_identical_checkpoints() {
        let data = tiny_data();
        let a = train(&data, &MaskStrategy::OneHot, &tiny_cfg(30)).unwrap();
        let b = train(&data, &MaskStrategy::OneHot, &tiny_cfg(30)).unwrap();
        assert_eq!(a.checkpoint.to_json(), b.checkpoint.to_json());
        assert_eq!(a.history, b.history);
        let c = train(&data, &MaskStrategy::OneHot, &TrainConfig { seed: 5, ..tiny_cfg(30) }).unwrap();
        assert_ne!(a.checkpoint.to_json(), c.checkpoint.to_json());
    }

    #[test]
    fn history_cadence_and_identity() {
        let cfg = tiny_cfg(120);
        let out = train(&tiny_data(), &MaskStrategy::Window { length: 2 }, &cfg).unwrap();
        let iters: Vec<usize> = out.history.iter().map(|r| r.iter).collect();
        assert_eq!(iters, vec![0, 50, 100, 119]);
        for r in &out.history {
            let l = r.loss;
            assert!(l.rf >= 0.0 && l.zf >= 0.0 && l.sparsity >= 0.0);
            assert_eq!(l.total, l.rf + cfg.zf_weight * l.zf + cfg.lambda_sparsity * l.sparsity);
        }
        assert_eq!(out.checkpoint.meta.mask_kind, "window:2");
    }

    #[test]
    fn fixed_encoder_trains() {
        let cfg = TrainConfig {
            encoder: EncoderKind::Fixed,
            ..tiny_cfg(20)
        };
        let strategy = MaskStrategy::Fixed { mask: vec![1, 0, 0, 0, 0, 0] };
        let out = train(&tiny_data(), &strategy, &cfg).unwrap();
        assert!(matches!(out.checkpoint.encoder, Encoder::Fixed(_)));
    }

    #[test]
    fn loss_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        let out = train(&tiny_data(), &MaskStrategy::OneHot, &tiny_cfg(3)).unwrap();
        write_loss_csv(&path, &out.history).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,rf,zf,sparsity,total"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn mismatched_strategy_is_refused() {
        let err = train(&tiny_data(), &MaskStrategy::lattice(3), &tiny_cfg(1)).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }
}
