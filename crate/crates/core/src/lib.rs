//! Iterated sampling importance resampling (i-SIR) with a fractional,
//! adaptively tuned number of proposals, and an exact finite-state lab for
//! studying its asymptotic variance.

pub mod adapt;
pub mod diagnostics;
pub mod error;
pub mod kernel;
pub mod lab;
pub mod model;
pub mod quad;
pub mod rng;

pub use error::{IsirError, Result};
