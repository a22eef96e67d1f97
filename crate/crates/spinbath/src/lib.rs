//! Exact state-vector simulation of proton-driven ¹³C spin diffusion under
//! magic-angle spinning, plus level-spacing chaos diagnostics of the proton
//! bath.
//!
//! The crate is organized along the pipeline:
//!
//! * [`structure`] — spin-system description (sites, shift tensors, jump
//!   groups) loaded from JSON, plus distance ordering and bath truncation;
//! * [`hamiltonian`] — time-dependent secular Hamiltonian terms for one
//!   crystallite orientation under sample spinning;
//! * [`propagator`] — 4th-order Suzuki-Trotter evolution of the 2ⁿ state
//!   vector from a typicality (random rest) initial state;
//! * [`powder`] — crystallite orientation sampling, trajectory averaging, and
//!   the local-field dispersion curve;
//! * [`chaos`] — symmetry-sector diagonalization of the proton bath, spectrum
//!   unfolding, spacing histograms, and the chaoticity parameter η;
//! * [`cli`] — subcommand orchestration for the `spinsim` binary.

pub mod chaos;
pub mod cli;
pub mod config;
pub mod constants;
pub mod dense;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod output;
pub mod powder;
pub mod propagator;
pub mod structure;

pub use error::{Error, Result};
