//! Lattice Gaussian free field toolkit: exact sampling, dyadic
//! approximation schemes, a non-thin local set exploration, and the
//! thinness test battery built on top of it.

pub mod cli;
pub mod dyadic;
pub mod error;
pub mod exploration;
pub mod green_field;
pub mod rng;
pub mod sine;
pub mod stats;
pub mod thinness;

pub use error::{Error, Result};
