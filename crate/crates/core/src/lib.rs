//! Parity-assisted quantum state transfer through an ultrastrongly coupled
//! two-qubit quantum Rabi mediator.
//!
//! Energies are in units of the cavity frequency and ħ = 1. Conversions to
//! physical units live in [`units`].

extern crate blas_src;

pub mod csvfmt;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod models;
pub mod presets;
pub mod protocol;
pub mod qops;
pub mod spectral;
pub mod units;

pub use error::{QstError, Result};
