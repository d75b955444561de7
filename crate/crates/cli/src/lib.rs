//! Campaign plumbing for the `gridarena` command: configuration, run
//! directories, reports.
//!
//! A run directory holds `tables/<id>.csv` with its manifest and group
//! labels, and one `runs/<key>.jsonl` file per finished run.

pub mod commands;
pub mod config;
mod error;

pub use error::{CliError, CliResult};
