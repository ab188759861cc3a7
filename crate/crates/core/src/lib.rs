// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod counts;
pub mod error;
pub mod fock;
pub mod formats;
pub mod metrology;
pub mod mzi;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
