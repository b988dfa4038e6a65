//! Discrete phase optimization for reconfigurable intelligent surfaces.
//!
//! Channel-gain maximization over quantized RIS phases is mapped onto an
//! Ising Hamiltonian whose ground state is the optimal configuration, then
//! minimized with software annealers.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod ising;
pub mod reduction;
pub mod scenario;
pub mod scene;
pub mod solvers;

pub use error::{Error, Result};
