//! Experiment runner: configuration, datasets, sweeps and CSV output.

pub mod ber;
pub mod config;
pub mod dataset;
pub mod experiment;
pub mod method;
pub mod plot;
pub mod records;

pub use config::ExperimentConfig;
pub use method::Method;
pub use records::{emit_csv, parse_csv, read_csv, SweepRecord};
