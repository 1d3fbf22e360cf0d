//! Command-line front end: run configuration, subcommand dispatch and
//! artifact files.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{dispatch, emit_plot_data, Command, DispatchOptions, PlotData, PlotKind, Report};
pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::CliError;
