//! Command-line front end for the `iecc` codec: file compression and
//! decompression, quality metrics, histograms, the IEC stream simulation
//! and the benchmark matrix.
//!
//! Exit codes are listed in [`error::exit`].

pub mod bench;
pub mod cli;
pub mod commands;
pub mod error;
pub mod io;
pub mod report;

pub use cli::{run, Cli};
pub use error::CliError;
