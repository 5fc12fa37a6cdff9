//! Speed- and load-robust bearing fault features for rotating machinery.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjust;
pub mod baseline;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod filter;
pub mod harmonic;
pub mod io;
pub mod pipeline;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
