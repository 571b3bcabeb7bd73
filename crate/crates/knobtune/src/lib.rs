//! knobtune: a sampling-based online controller for streaming workloads.
//!
//! Within each phase of a long-running workload, the controller spends a
//! small budget of measured knob-setting samples (Latin hypercube
//! initialization, Gaussian-process regression picks, constraint-weighted
//! Bayesian optimization) and then commits to the best setting found until
//! the phase detector sees the workload shift. A synthetic workload
//! simulator, a client/server wire protocol, and a benchmark harness with a
//! brute-force oracle make the whole loop reproducible on a desk.

pub mod acquisition;
pub mod controller;
pub mod error;
pub mod gp;
pub mod knobspace;
mod linalg;
pub mod protocol;
pub mod sampler;
pub mod simulator;
pub mod spec;

pub use error::{Error, Result};
