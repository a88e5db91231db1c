//! Command-line harness for the comparative study: scenario generation, the
//! six estimators, metrics, CSV/JSON reports and SVG plots.

pub mod commands;
pub mod config;
pub mod error;
pub mod methods;
pub mod plot;
pub mod report;
pub mod results;
pub mod workbench;

pub use config::{Method, RunConfig};
pub use error::{BenchError, Result};
