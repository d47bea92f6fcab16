//! Configuration, output files and the run drivers behind the `polyshell` binary.

pub mod config;
pub mod output;
pub mod runs;
pub mod scenarios;
pub mod validate;
