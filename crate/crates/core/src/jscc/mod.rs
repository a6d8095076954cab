//! Variational neural codec and its training.
//!
//! The encoder emits `[μ | logvar]` and takes σ = exp(logvar/2). Latent
//! vectors are packed into complex symbols as interleaved (re, im) pairs, so
//! inside the training graph a complex frame is simply a real row of length
//! d and power normalization is a row-norm division.

mod checkpoint;
mod codec;
mod ops;
mod pipeline;
mod train;

pub use checkpoint::{from_bytes, load_checkpoint, parameter_checksum, save_checkpoint, to_bytes, MAGIC, VERSION};
pub use codec::{decode, encode, JsccCodec, JsccDecoder, JsccEncoder, Objective, INIT_LOGVAR, LOGVAR_BOUND};
pub use ops::{
    compute_kl, compute_tscc_loss, compute_vae_loss, normalize_power, pack_complex, reparameterize, unpack_complex,
    LossBreakdown,
};
pub use pipeline::{forward_pipeline, Link, PipelineOutput};
pub use train::{
    batch_from_samples, batch_loss, fit, loss_and_gradient, train_reconstruction, train_tscc, TrainBatch, TrainedCodec,
};
