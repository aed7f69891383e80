//! Simulation and analysis of phase-locked photon echoes in an
//! inhomogeneously broadened three-level Λ ensemble.
//!
//! The crate is organised bottom-up:
//!
//! - [`bloch`]: rotating-frame Hamiltonian, relaxation and the master-equation
//!   right-hand side for one detuning group.
//! - [`integrator`]: fixed-step RK4 with an exact-propagator oracle.
//! - [`ensemble`]: the Gaussian detuning grid and the macroscopic signal.
//! - [`protocol`]: pulse sequences, the echo timing law and pulse-area rules.
//! - [`analysis`]: echo peaks, signed efficiency, decay fits, Bloch vectors.
//! - [`scenario`], [`runner`], [`svg`]: scenario files, runs and scans, and
//!   CSV / SVG output used by the `photon-echo` binary.

pub mod analysis;
pub mod bloch;
pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod protocol;
pub mod runner;
pub mod scenario;
pub mod svg;

pub use error::{Error, Result};
