//! Pun location and pun interpretation, built from scratch.
//!
//! The crate has three layers:
//!
//! * [`num`] — a deterministic numeric core: row-major tensors generic over
//!   the scalar type, reverse-mode differentiation over a fixed primitive
//!   set, finite-difference gradient checking, Adam, and a binary
//!   checkpoint format.
//! * [`lexicon`] / [`corpus`] — parsers and lookup tables for the
//!   pronunciation dictionary, the sense inventory (glosses), the pun
//!   corpus XML and its gold annotation files, fold plans, and pun-gloss
//!   pair construction.
//! * [`encoder`] / [`locator`] / [`interpreter`] / [`evalkit`] — a small
//!   trainable contextual encoder, the dual-attention pun locator, the
//!   pun-gloss-pair interpreter with its most-frequent-sense baseline, and
//!   the precision/recall/F1 harness with the cross-validation driver.
//!
//! All model math runs on 64-bit floats by default; the numeric core is
//! generic over [`num::Scalar`] and the `*64` aliases below pin the
//! concrete types used across the crate.

pub mod corpus;
pub mod encoder;
pub mod evalkit;
pub mod interpreter;
pub mod lexicon;
pub mod locator;
pub mod num;
pub mod synth;

/// Row-major tensor over `f64` (the default for every model in this crate).
pub type Tensor64 = num::Tensor<f64>;
/// Row-major tensor over `f32`.
pub type Tensor32 = num::Tensor<f32>;
/// Computation tape over `f64`.
pub type Tape64 = num::Tape<f64>;
/// Parameter collection over `f64`.
pub type ParamSet64 = num::ParamSet<f64>;
/// The pun locator instantiated at `f64`.
pub type Dann64 = locator::Dann<f64>;
/// The pun-gloss-pair interpreter instantiated at `f64`.
pub type Interp64 = interpreter::Interp<f64>;
