//! Command-line front end for the drpolicy benchmarks.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_cli, parse_config, parse_config_file, resolve, Command, FileConfig, Flags, Format, RunConfig, SpaceKind};
pub use error::CliError;
pub use output::{Row, Table, CSV_HEADER};
pub use run::{execute, run, run_with_workers};
