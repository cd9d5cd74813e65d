//! Command-line front end: configuration, stage functions and the full
//! pipeline behind the `seasonality` binary.

pub mod app;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod stages;

pub use config::RunConfig;
pub use error::{Category, CliError, CliResult};
pub use pipeline::{pipeline_outputs, run_pipeline};
