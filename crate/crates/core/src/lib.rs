//! Geometric quantum mechanics on finite-dimensional projective state spaces.
//!
//! Pure states are points of `CP^n` carrying the Fubini-Study metric. On top of
//! that geometry the crate provides spinor constructions for spin-1 and
//! spin-3/2 systems, a geodesic entanglement measure for two qubits with a
//! brute-force cross-check, linear and nonlinear Hamiltonian flows, geometric
//! phases, geometric uncertainty relations and ensemble (density function)
//! states.

pub mod dynamics;
pub mod ensembles;
pub mod entanglement;
pub mod error;
pub mod linalg;
pub mod phase;
pub mod projective;
pub mod sampling;
pub mod selftest;
pub mod spin;
pub mod statistics;

pub use error::{Error, Result};
pub use projective::{ChartPoint, DualState, Observable, ProjectiveLine, PureState, SpectralData};
