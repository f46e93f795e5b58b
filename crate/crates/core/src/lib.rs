//! Monte Carlo laboratory for multiplicative wealth-exchange economies.
//!
//! Wealth follows a multiplicative process whose correlation exponent `alpha`
//! ties individual growth to gross-product growth. The crate simulates two
//! microdynamics that realize it, fits the resulting Pareto tails, and runs
//! the conservation, government-intervention and thermalization experiments.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod model;
pub mod netgen;
pub mod output;
pub mod rng;

pub use error::{Error, Result};
