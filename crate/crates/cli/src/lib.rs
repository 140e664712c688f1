//! Command line front end: configuration files, dispatch and run
//! directories.

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, Command, Overrides, RunConfig};
pub use error::{CliError, Result};
pub use run::{execute, Outcome};
