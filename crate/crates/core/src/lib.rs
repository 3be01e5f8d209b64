//! Meshfree peridynamics on uniform node clouds.
//!
//! The crate is organised around the pipeline of a simulation run:
//!
//! * [`discretization`] builds the node cloud and the horizon neighbour lists,
//! * [`material`] evaluates bond-based and state-based internal force densities,
//! * [`integrator`] advances the body in time (velocity Verlet, central
//!   difference) or through quasi-static load steps (Newton with a
//!   finite-difference tangent),
//! * [`linalg`] stores the tangent and solves the Newton systems,
//! * [`deck`] and [`output`] handle YAML input decks and field snapshots,
//! * [`analysis`] holds the classical-mechanics oracles, L2 norms and
//!   mesh-convergence estimates used by [`validate`] and [`study`].
//!
//! Every hot loop runs through [`runtime::Runtime`], which guarantees results
//! that do not depend on the number of worker threads.

// `!(x > 0.0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod deck;
pub mod discretization;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod material;
pub mod output;
pub mod runtime;
pub mod simulation;
pub mod study;
pub mod validate;

pub use error::{Error, Result};
pub use runtime::Runtime;
