//! Deterministic numeric core: tensors, reverse-mode differentiation over a
//! fixed primitive set, gradient checking, Adam, and checkpoints.
//!
//! Everything here is generic over the scalar type via [`Scalar`]; the
//! models in this crate instantiate it at `f64` so gradient checks stay
//! tight. There is no hidden state beyond the optimizer's moment buffers
//! and [`Rng`].

mod adam;
mod checkpoint;
mod error;
mod gradcheck;
mod ops;
mod params;
mod rng;
mod scalar;
mod tape;
mod tensor;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, FORMAT_VERSION};
pub use error::NumError;
pub use gradcheck::{grad_check, grad_check_faulted, GradCheckReport, ParamError};
pub use ops::{cross_entropy, linear, masked_softmax, softmax_row};
pub use params::{ParamId, ParamSet, Parameter};
pub use rng::Rng;
pub use scalar::Scalar;
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;
