//! Lattice laboratory for backward SDEs driven by G-Brownian motion with
//! time-varying monotone generators.

// `!(x < y)` is how the validators reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod oracles;
pub mod rootfind;
pub mod solver;
pub mod sublinear;
pub mod yosida;

pub use error::{Error, ErrorKind, Result};
