//! Numerical laboratory for horospherical averages twisted by nilcharacters.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averages;
pub mod cli;
pub mod diophantine;
pub mod error;
pub mod group;
pub mod homspace;
pub mod nilchar;
pub mod qmc;
pub mod quadrature;
pub mod rates;

pub use error::{Error, Result};
