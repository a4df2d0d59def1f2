//! Experiment runner for `qrn-core`.
//!
//! Each experiment kind reads a flat `key = value` config, runs one family
//! of checks and emits a report whose body (everything except wall time)
//! is a pure function of the config, the seed and the library version.

pub mod app;
pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ConfigError, ExperimentConfig, Kind};
pub use report::ExperimentReport;

/// Process exit statuses.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const CHECK_FAILED: u8 = 1;
    pub const CONFIG_ERROR: u8 = 2;
}
