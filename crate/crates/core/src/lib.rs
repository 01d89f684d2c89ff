//! Heralded x-ray photons on a mosaic-crystal beam splitter.
//!
//! The crate models down-conversion pair amplitudes and the rates behind a
//! Bragg splitter, simulates detector event streams, emulates the coincidence
//! electronics and computes the correlation estimators used to test
//! single-photon behaviour.

pub mod daq;
pub mod error;
mod io;
pub mod montecarlo;
pub mod optics;
pub mod spdc;
pub mod special;
pub mod splitter;
pub mod stats;
pub mod table;

pub use error::{Error, Result};
