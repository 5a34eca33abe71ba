//! Gauge integration over λ-Morse covers.
//!
//! A gauge `δ` is built from an integrand so that every `δ`-fine, centre-tagged
//! family of Morse sets gives a Riemann sum within `eps` of the integral in L¹.
//! The crate builds those gauges, sieves fine families out of dyadic cubes or
//! balls and certifies the resulting sums against exact oracles.

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod gauge;
pub mod geometry;
pub mod integrate;
pub mod measure;
pub mod partition;
pub mod quadrature;
pub mod riemann;

pub use error::{Error, Result};
