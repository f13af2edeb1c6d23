//! Numerics for the Zakharov–Kuznetsov equation on rectangular tori:
//! dual lattices, resonance geometry, lattice counting, Whitney-type
//! frequency decompositions, trilinear forms on thickened surfaces and a
//! pseudo-spectral solver.

pub mod error;
pub mod fft;
pub mod freq_decomposition;
pub mod lattice_counting;
pub mod resonance;
pub mod spectral_lattice;
pub mod thickened_surfaces;
pub mod trilinear_forms;
pub mod zk_solver;

pub use error::{Result, ZkError};
