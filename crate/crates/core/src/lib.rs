// NaN-rejecting guards are written as negated comparisons on purpose, and
// reference constants keep the digits of their source.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod aft;
pub mod cli;
pub mod cox;
pub mod error;
pub mod logrank;
pub mod metrics;
pub mod mvn;
pub mod quadrature;
pub mod rmst;
pub mod sim;
pub mod special;
pub mod survival;

pub use error::{NphError, Result};
