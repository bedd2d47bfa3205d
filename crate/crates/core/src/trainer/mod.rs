//! Mask strategies, coupled batches, the zero-flow objective and the training loop.

mod batch;
mod config;
mod loss;
mod masks;
mod train;

pub use batch::{interpolate, make_batch, omega, sample_beta, Batch, T_CLAMP};
pub use config::{EncoderKind, TrainConfig, ZfMode};
pub use loss::{
    evaluate_objective, gate_sparsity, objective_on_tape, rf_loss, zf_penalty, LossBreakdown, ObjectiveVars,
};
pub use masks::{sample_masks, unseen_lattice_pairs, validate_mask, MaskStrategy};
pub use train::{train, train_with_observer, write_loss_csv, LossRecord, TrainOutput, LOG_EVERY};
