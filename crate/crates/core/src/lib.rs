//! Exact simulation and change of measure for locally interacting pure-jump
//! particle systems on finite marked graphs.
//!
//! The crate is `no_std` and only needs `alloc`. It is organized bottom-up:
//!
//! - [`graph`]: finite graphs, neighborhoods, balls and α-separation.
//! - [`model`]: the jump rate contract ([`model::RateModel`]) and built-in models.
//! - [`sim`]: event-driven Poisson thinning for the target and reference processes,
//!   plus jump characteristics and duals of trajectories.
//! - [`girsanov`]: the likelihood ratio of the target law against the reference law,
//!   importance sampling and martingale diagnostics.
//! - [`oracle`]: exact finite-state transient laws, grid path laws and conditional
//!   mutual information.
//! - [`mrftest`]: permutation tests of conditional independence on simulated ensembles.
//!
//! Everything here is sequential and deterministic. Parallel drivers live in the
//! companion `ips` crate and call into the per-replicate entry points exposed here.
#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod girsanov;
pub mod graph;
pub mod model;
pub mod mrftest;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{Graph, Mark, MarkedGraph, VertexId, VertexSet};
pub use model::{Jump, JumpSet, RateKind, RateModel, State, StateSpace};
pub use sim::{PoissonStreams, Trajectory};
