//! Minimal reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! Build a [`Tape`] per forward pass, register trainable tensors with
//! [`Tape::param`] and everything else with [`Tape::constant`], then call
//! [`Tape::backward`] on a scalar loss. Constants (frozen weights, data,
//! sampled noise) never receive adjoints, and adjoints are not computed for
//! subgraphs that depend only on constants.

mod check;
mod param;
mod tape;
mod tensor;

pub use check::{finite_difference_check, pre_perturb, FdReport};
pub use param::{seeded_init, Adam, Parameter};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{sigmoid, Tensor};
