//! Numerical equilibrium engine for strategic informed trading in a complete
//! market of state-contingent claims.
//!
//! The crate is `no_std` with `alloc`; the default `std` feature enables
//! parallel Monte Carlo through rayon.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod error;
pub mod numeric;
pub mod quadrature;
pub mod market_model;
pub mod info_kernel;
pub mod posterior;
pub mod equilibrium;
pub mod orderflow;
pub mod objective;
pub mod analytics;
pub mod options;

pub use error::{Error, Result};
