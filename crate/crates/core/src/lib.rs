//! Repeated risk minimization against stateful environments.
//!
//! An institution retrains a classifier on the latest population
//! (`theta_t = G(d_{t-1})`); the population then responds through a
//! transition map that sees both the new classifier and its own previous
//! state (`d_t = Tr(d_{t-1}, theta_t)`). The crate plays that game, measures
//! it in the product metric `W1 + ||.||_2`, and checks the contraction,
//! fixed-point and optimality properties that govern it.

pub mod cli;
pub mod data;
pub mod distribution;
pub mod engine;
pub mod error;
pub mod losses;
pub mod transitions;

pub use error::{Error, Result};
