//! Numerical laboratory for boundary regularity of parabolic double-phase
//! equations: variational capacities and Wiener quantities, an explicit
//! finite-difference solver, and verifiers that evaluate both sides of the
//! energy, expansion-of-positivity and boundary-decay inequalities on
//! computed solutions.

pub mod boundary;
pub mod capacity;
pub mod error;
pub mod estimates;
pub mod geometry;
pub mod pde;
pub mod suite;
pub mod phase;

pub use error::{Error, Result};
