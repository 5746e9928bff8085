//! Distributed optimal output consensus for heterogeneous uncertain
//! nonlinear agents.
//!
//! The library implements a two-step design. A distributed signal
//! generator ([`generator`]) solves the consensus optimization problem
//! over a digraph, producing per-agent references that converge to the
//! minimizer of the summed local costs ([`costs`]). A per-agent tracking
//! controller ([`controller`]) — a dynamic compensator plus an adaptive
//! damping gain — steers each plant's output ([`plants`]) onto its
//! reference despite static parameter uncertainty and unmodeled zero
//! dynamics. The closed loop is integrated with fixed-step RK4 ([`sim`])
//! from scenario files ([`scenario`]), with spectral preconditions checked
//! by [`graph`].

pub mod controller;
pub mod costs;
pub mod error;
pub mod expr;
pub mod generator;
pub mod graph;
pub mod plants;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
