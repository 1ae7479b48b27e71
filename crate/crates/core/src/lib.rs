//! Simulation of linear-threshold contagion on social networks and
//! inference attacks against randomized-response reports of node
//! attributes.
//!
//! The crate is organized as a pipeline:
//!
//! * [`graph`] and [`netgen`] build and prepare directed influence
//!   networks;
//! * [`cascade`] spreads a binary attribute through a network and
//!   [`privacy`] perturbs the resulting labels with randomized response;
//! * [`ldag`] approximates each node's influence neighborhood with a local
//!   DAG, and [`inference`] fits per-node activation probabilities against
//!   the perturbed reports, with or without a population-level constraint;
//! * [`metrics`] scores the recovered attributes (AUC against the ground
//!   truth, expected accuracy, correlation diagnostics), and [`harness`]
//!   drives full experiments from a flat config file to CSV outputs.

pub mod cascade;
pub mod error;
pub mod graph;
pub mod harness;
pub mod inference;
pub mod ldag;
pub mod metrics;
pub mod netgen;
pub mod privacy;
pub mod rng;

pub use error::{Error, Result};
