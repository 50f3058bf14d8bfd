//! Command-line front end for `plap-core`: problem catalog, JSON run
//! configuration, and the commands behind the `plap` binary.

pub mod catalog;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{Command, RunConfig};
pub use error::CliError;
pub use run::{run, Outcome};
