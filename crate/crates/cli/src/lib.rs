//! Config parsing and subcommand pipelines behind the `colombeau-lab` binary.

pub mod config;
pub mod run;
