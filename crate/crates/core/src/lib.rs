//! Design by adaptive sampling over DNA sequences.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod engine;
pub mod genmodels;
pub mod oracles;
pub mod seq;
