//! Deformed complex Ginibre ensemble toolkit.

// `!(x > 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bulk;
pub mod catalog;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod lab;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod serde_complex;
pub mod stats;
pub mod variational;

pub use error::{Error, Result};
