//! Single-excitation transport on disordered spin chains with on-site
//! dephasing and incoherent nearest-neighbour hopping.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: chain definition, static disorder and the tridiagonal
//!   single-excitation Hamiltonian.
//! - [`dynamics`]: density-matrix evolution of the two master equations,
//!   plus dense oracles used to certify it.
//! - [`trajectories`]: pure-state jump unravelings of both master equations.
//! - [`observables`]: site probabilities, mean-square displacement and
//!   power-law fits.
//! - [`ensemble`]: disorder averaging and parameter sweeps.
//!
//! All rates and times are in units of the coherent coupling `g` when the
//! chain is built with `g = 1`.

pub mod dynamics;
pub mod ensemble;
mod error;
pub mod grid;
pub mod lattice;
pub mod observables;
pub mod seed;
pub mod trajectories;

pub use error::{Error, Result};
