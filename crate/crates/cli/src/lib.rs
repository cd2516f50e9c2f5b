//! File formats, report documents and subcommands behind the `diffrank`
//! binary.
//!
//! Exit codes: 0 on success, 1 on bad input or usage, 2 when propagation
//! hits its iteration cap (the report is still written).

pub mod args;
pub mod commands;
mod error;
pub mod input;
pub mod output;

pub use commands::{main_with, run};
pub use error::{CliError, ParseError, EXIT_INPUT_ERROR, EXIT_NOT_CONVERGED, EXIT_SUCCESS};
