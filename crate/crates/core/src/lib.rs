#![no_std]
// Negated comparisons are used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod factorize;
pub mod gadgets;
pub mod gram_decode;
pub mod graph;
pub mod linalg;
pub mod matrix;
pub mod oracle;
pub mod rng;
pub mod rounding;
pub mod solve;

pub use error::{Error, Result};
