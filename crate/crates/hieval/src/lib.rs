//! File formats, plotting and the `hieval` command line on top of
//! `hieval-core`.

pub mod cli;
pub mod commands;
pub mod error;
pub mod io;
pub mod model;
pub mod runner;
pub mod svg;

pub use error::{CliError, CliResult, ExitKind};

/// Version string recorded in manifests and SVG headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
