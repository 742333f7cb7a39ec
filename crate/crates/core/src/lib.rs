//! Simulation and verification engine for the one-dimensional porous-elastic
//! system with frictional and delayed damping on the volume fraction.
//!
//! - [`model`]: parameters, forcing, initial data, admissibility.
//! - [`solver`]: method-of-lines integration (transport and ring-buffer
//!   representations of the delay).
//! - [`diagnostics`]: energy, H-norm, dissipation and Lyapunov functionals.
//! - [`spectral`]: generator matrix, dissipativity probe, eigenvalues.
//! - [`analysis`]: decay fits, refinement studies, sweeps.
//! - [`scenario`], [`io`]: scenario files and artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod analysis;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod model;
pub mod scenario;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{ForcingSpec, InitialData, PhysicalParams};
pub use scenario::Scenario;
pub use solver::{GridSpec, SimState, System, Trajectory};
