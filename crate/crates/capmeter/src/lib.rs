//! Std companion to `capmeter-core`: CSV datasets, experiment records,
//! capacity sweeps, the HTTP session service and the `capmeter` CLI.

pub mod csv_io;
mod error;
pub mod experiment;
pub mod output;
pub mod service;
pub mod sweep;

pub use error::{Error, Result};
pub use experiment::{
    DatasetSpec, Experiment, ExperimentRecord, ExperimentSpec, MetricsFrame, RunReport, SCHEMA_VERSION,
};
