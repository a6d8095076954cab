//! Task-oriented source-channel coding over simulated noisy channels.
//!
//! The crate provides a variational neural codec trained against a frozen
//! control agent ([`jscc`], [`agent`]), the channel models it is evaluated
//! over ([`channel`]), a classical digital chain for comparison
//! ([`baseline`]), and the fidelity metrics used to score both ([`metrics`]).

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod autodiff;
pub mod baseline;
pub mod channel;
mod error;
pub mod jscc;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod scene;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    compression_ratio, noise_variance_to_snr, snr_to_noise_variance, ActionVector, ChannelConfig, ChannelKind,
    CodecConfig, ImageDims, ImageTensor, LatentGaussian, Sample, StateVector, SymbolFrame,
};
