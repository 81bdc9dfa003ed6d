//! Long-wave approximation of Fermi-Pasta-Ulam lattices by generalized KdV
//! solitary waves, with numerical validation of the error bounds.
//!
//! The crate is organised around the pieces of the approximation argument:
//!
//! - [`gkdv`]: periodic pseudo-spectral solver for `W_tau = -(1/24) W''' - (1/2)(W^p)'`
//! - [`ansatz`]: the correction `P_eps` and lattice initial data
//! - [`lattice`]: time integration of the FPU strain system
//! - [`diagnostics`]: residuals, remainder, energy-type quantity, error norms
//! - [`harness`]: parameter scans, time windows, fits and output files

pub mod ansatz;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod gkdv;
pub mod harness;
pub mod lattice;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{ErrorRecord, FieldProfile, LatticeState, ModelParams};
