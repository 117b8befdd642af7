//! Random-matrix quantum dynamics and a small convolutional regressor.
//!
//! The crate samples GUE Hamiltonians, evolves thermofield-double states on an
//! integer time grid, measures their Krylov spread complexity, and trains a
//! 1D CNN (or a fully connected network) to predict that complexity from raw
//! amplitudes. Everything here is pure computation: file formats, plotting and
//! the command-line driver live in the `krylov-lab` crate.
//!
//! The crate is `no_std` (with `alloc`) when built without the `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dataset;
pub mod ensemble;
mod error;
pub mod krylov;
pub mod nn;
pub mod numerics;
pub mod states;

pub use error::{Error, Result};
pub use num_complex::Complex64;
