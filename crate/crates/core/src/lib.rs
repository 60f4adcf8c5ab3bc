// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod detectors;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod linear;
pub mod lstm;
pub mod ramp;
pub mod series;
pub mod synth;
pub mod table;

pub use error::{Error, Result};

/// Crate version, echoed into every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
