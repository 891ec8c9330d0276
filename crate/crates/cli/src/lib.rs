//! Command-line surface, file I/O, standardization, and the Monte Carlo
//! bench harness for adaptively robust sparse k-means.

pub mod bench;
pub mod commands;
mod error;
pub mod io;
pub mod standardize;

pub use error::{CliError, CliResult};
