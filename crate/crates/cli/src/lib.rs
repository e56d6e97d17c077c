//! Configuration-driven experiment runner for counterfactual search on
//! time series forecasters.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod synth;

pub use config::{ExperimentConfig, Method};
pub use error::{CliError, Result};
