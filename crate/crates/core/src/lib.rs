// `!(x > 0.0)` is used throughout on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod comparison;
pub mod error;
pub mod format;
pub mod loss_models;
pub mod mc_oracle;
pub mod quantile_approx;
pub mod reports;
pub mod special_fn;

pub use error::{Error, Result};
