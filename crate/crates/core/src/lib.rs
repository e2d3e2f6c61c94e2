//! Constrained Hamiltonian mechanics of a classical spinning particle.
//!
//! The spin lives on a constraint surface in the `(ω, π)` phase space; the
//! observable spin is `S = ω × π`. The crate provides Poisson and Dirac
//! brackets, constraint classification and projection, the fiber-bundle
//! maps of the SO(3) surface, Lorentz-covariant spin kinematics, and an
//! adaptive integrator for motion in magnetic fields.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle_so3;
pub mod cli;
pub mod constraints;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod lorentz;
pub mod phasespace;
pub mod sampling;

pub use error::{Error, Result};
pub use phasespace::{CanonicalStructure, Observable, PhasePoint};
