//! Bayesian nonparametric Poisson factorization of networks with a
//! generalized gamma process prior over community weights.

pub mod archive;
pub mod asymptotics;
pub mod config;
pub mod crm;
pub mod diagnostics;
pub mod error;
pub mod generative;
pub mod graph;
pub mod inference;
pub mod postproc;
pub mod rng;
pub mod samplers;
pub mod stats;
pub mod trace;

pub use error::{Error, Result};
