//! Transferable, imperceptibility-constrained adversarial images against an
//! ensemble of small differentiable binary classifiers.
//!
//! Two attack streams produce candidates for every input: a momentum /
//! look-ahead / smoothed-gradient / input-diversity PGD over a weighted
//! surrogate ensemble, and a saliency-masked PGD on a single surrogate. A
//! selection stage keeps whichever candidate scores higher on held-out
//! classifiers, weighting each success by its SSIM to the original.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod imgmath;
pub mod models;
pub mod attacks;
pub mod selection;
pub mod harness;

pub use error::{Error, Result};
