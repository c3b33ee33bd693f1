//! Entropy coding of unit-quantized Gaussian latents whose distribution
//! parameter is itself quantized.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod codebook;
pub mod entropy_coder;
pub mod error;
pub mod eval;
pub mod gauss_model;
pub mod numeric;
pub mod param_map;
pub mod redundancy;

pub use error::{Error, Result};
pub use gauss_model::{GaussianModel, SigmaValue};
