//! Batch front end for robust instability radius analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_rir_fixed, cmd_rir_param, cmd_simulate, Report, RunOutput};
pub use error::CliError;
