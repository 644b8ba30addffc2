//! Configuration-driven runner for frame-bound estimates and oracle checks.

pub mod config;
pub mod run;
pub mod scenarios;
pub mod system;

pub use config::{ConfigError, RunConfig};
pub use run::{execute, render_report, run_config, run_file, write_artifacts, RunOutcome};
pub use scenarios::{scenario, NAMES};
