//! Robust influence maximization for hyperparametric Independent Cascade
//! models.
//!
//! Edge probabilities are generated as `h(θᵀx_e)` from per-arc features and an
//! unknown hyperparameter `θ` in a box. The library samples a cover of the
//! hyperparameter box, runs a multiplicative-weights loop with a lazy greedy
//! best response over the covered influence functions, and returns a uniform
//! mixture of seed sets whose worst-case influence is near the max-min
//! optimum. Baselines, exact brute-force oracles and constructive instances
//! are included for evaluation.

pub mod baselines;
mod bits;
pub mod cascade;
pub mod config;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod hypermodel;
pub mod optimize;
pub mod reach;
pub mod report;
pub mod seed;
pub mod verify;

pub use error::{Error, Result};
