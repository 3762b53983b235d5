//! Command implementations and file formats behind the `polyfield` binary.
//!
//! The binary surface is thin: `main` parses flags and maps [`CliError`]
//! to exit codes (0 ok, 1 validation/parse, 2 I/O). Everything else lives
//! here so the pipeline is scriptable from tests and other crates.

pub mod commands;
pub mod error;
pub mod formats;

pub use error::CliError;
