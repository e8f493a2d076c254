//! Numerical core for perturbation propagation in anharmonic oscillator lattices.
//!
//! The crate is `no_std` (with `alloc`) and contains everything that is pure
//! computation: the lattice model and its energy observables, velocity-Verlet
//! dynamics on a finite box with free boundary, the exact tangent flow of the
//! discrete integrator, Metropolis sampling of the finite-volume Gibbs measure,
//! and the light-cone measurements built on top of them. IO, configuration
//! files and parallel job scheduling live in the `lightcone` crate.
//!
//! All reductions use a fixed summation order and all transcendental functions
//! go through `libm`, so results are bit-reproducible for a given input.

#![no_std]

extern crate alloc;

pub mod bracket;
pub mod convergence;
pub mod diagnostics;
pub mod dynamics;
pub mod energy;
mod error;
pub mod gibbs;
pub mod lattice;
pub mod lightcone;
mod math;
pub mod potential;
pub mod rng;
pub mod series;
pub mod state;
pub mod stats;
pub mod tangent;

pub use crate::error::{Error, Result};
pub use crate::lattice::{Cube, Lattice, LatticeSpec, Site};
pub use crate::potential::Potential;
pub use crate::state::PhaseState;
