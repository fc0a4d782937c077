//! Command-line front end for `worstcase-core`: JSON configuration, CSV and
//! JSON output, and a rayon-backed executor.

pub mod config;
pub mod exec;
pub mod output;
pub mod run;

pub use config::{Config, ConfigError};
pub use exec::Rayon;
pub use run::{run, Artifacts, CheckOutcome, Report, RunError, Subcommand, SCHEMA_VERSION};
