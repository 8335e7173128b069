//! Cluster job-scheduling reinforcement-learning laboratory.
//!
//! The crate bundles a discrete-time multi-resource cluster simulator with an
//! image-shaped state, heuristic schedulers, a small CNN policy written from
//! scratch, behavior cloning from a heuristic teacher, REINFORCE training with
//! a time-indexed baseline, and evaluation sweeps.

pub mod baselines;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod seeds;
pub mod selftest;
pub mod training;
pub mod workload;

pub use error::{Error, Result};
