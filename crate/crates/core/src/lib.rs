//! Single-qubit purity dynamics under transverse classical noise.
//!
//! Units throughout: time in ns, angular frequencies and noise amplitudes in
//! rad/ns, user-facing frequencies in MHz (see [`units`]).

pub mod dynamics;
pub mod error;
pub mod noise;
pub mod oracles;
pub mod protocols;
pub mod qubit;
pub mod seed;
pub mod spectral;
pub mod units;

pub use error::{Error, Result};
pub use qubit::{BlochVector, DensityMatrix, Su2};
