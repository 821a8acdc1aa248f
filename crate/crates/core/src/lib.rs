//! Discrete-time laboratory for co-adapting agent populations and policies.
//!
//! The crate is organised along the layers of the model:
//!
//! * [`population`] builds synthetic agents (IPF, sampling, hot-deck imputation, priors).
//! * [`environment`] maps agent actions onto node loads, congestion and overload.
//! * [`behavior`] holds the static and adaptive decision rules and the belief layer.
//! * [`control`] manages policy vectors, the four regimes, policy search and the SCM.
//! * [`engine`] runs the time loop, computes performance and replicates runs.
//! * [`diagnostics`] symbolizes trajectories and estimates entropy rate, ε-machines and
//!   predictive information.
//! * [`analysis`] extracts run features and clusters them, samples designs and runs
//!   Morris screening.
//! * [`scenarios`] binds the emissions and grid case studies to the engine.
//! * [`config`] parses, canonicalizes and fingerprints experiment files.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod behavior;
pub mod config;
pub mod control;
pub mod diagnostics;
pub mod engine;
pub mod environment;
mod error;
pub mod population;
pub mod rng;
pub mod scenarios;

pub use error::{Error, Result};
