#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classify;
pub mod cli;
pub mod error;
pub mod expr;
pub mod fd_engine;
pub mod flow;
pub mod jets;
pub mod metrics;
pub mod ode;
pub mod quad;
pub mod report;
pub mod scalar;
pub mod surface;
pub mod tensors;

pub use error::{Error, Result};
