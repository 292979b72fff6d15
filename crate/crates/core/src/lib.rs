//! Consensus of single-integrator agents over clustered networks with hybrid
//! communication: continuous diffusion inside clusters, row-stochastic resets
//! across clusters at impulse times.
//!
//! Modules:
//! - [`linalg`]: dense kernel (matrix exponential, Jacobi eigensolver, null vectors).
//! - [`graph`]: clustered network model, Laplacian and connectivity predicates.
//! - [`sim`]: hybrid integration, impulse schedules and disturbances.
//! - [`analysis`]: product limits, consensus predictions, H∞ index, Lyapunov traces.
//! - [`certificate`]: flow and jump LMI checks, decay rate, certificate search.
//! - [`scenario`]: scenario files, the `run`/`sweep`/`verify` commands and their artifacts.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod certificate;
pub mod fixtures;
pub mod graph;
pub mod linalg;
pub mod scenario;
pub mod sim;
pub mod svg;
