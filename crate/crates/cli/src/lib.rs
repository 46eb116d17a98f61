//! Front end of the `qpt` binary: configuration, sweeps, scaling fits,
//! phase diagrams and the free-fermion cross-check.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod svg;
pub mod validate;

pub use commands::run_cli;
pub use error::{CliError, CliResult};
