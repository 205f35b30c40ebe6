//! Verification suites and excess-risk sweeps for label-private SCO.

pub mod config;
pub mod csv;
pub mod error;
pub mod reduce;
pub mod sweep;
pub mod verify;

pub use config::{EpsilonSpec, ExperimentConfig, Overrides};
pub use error::{BenchError, Result};
