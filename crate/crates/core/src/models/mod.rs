//! Network definitions and checkpoint persistence.

mod checkpoint;
pub mod codec;
mod encoder;
mod mlp;
mod velocity;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, FORMAT_VERSION};
pub use encoder::{encoder_forward, AmortizedGateEncoder, Encoder, EncoderVars, FixedGateEncoder};
pub use mlp::{glorot_limit, init_mlp, MlpParams, MlpVars, OutputActivation};
pub use velocity::{velocity_forward, VelocityNet};
