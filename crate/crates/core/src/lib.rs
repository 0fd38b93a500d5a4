// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fdi;
pub mod flight_model;
pub mod harness;
pub mod nmpc;
pub mod pid;
pub mod pseudospectral;
pub mod qp;
pub mod wind;

pub use error::{Error, Result};
