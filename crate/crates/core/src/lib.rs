#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod charfun;
pub mod linalg;
pub mod tensor_decomp;
pub mod ica;
pub mod report;
pub mod gmm;
pub mod synth;
mod serde_util;

pub use error::{Error, ErrorKind, Result};
