//! Numerical core for quantum and classical impact oscillators.
//!
//! Everything here is `no_std` with `alloc`; file formats, configuration and
//! the command line live in the `qimpact` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classical;
pub mod diagnostics;
pub mod fft;
pub mod hamiltonian;
pub mod krylov;
pub mod lattice;
pub mod linalg;
pub mod observables;
pub mod otoc;
pub mod propagator;
pub mod qle;
pub mod rng;
pub mod spectral;
