//! Command-line front end for `kinetic-ot-core`: measure and result file
//! formats, packaged scenarios and verification suites.

pub mod cli;
pub mod error;
pub mod force;
pub mod io;
pub mod scenarios;
pub mod verify;

pub use error::{CliError, CliResult};
