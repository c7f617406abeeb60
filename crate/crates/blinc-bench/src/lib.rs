//! Library half of the `blinc-bench` binary: experiment configuration, the
//! runner, and report serialization. Kept as a lib so the pieces are
//! testable without spawning the CLI.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{parse_strategies, DatasetConfig, ExperimentConfig};
pub use report::{emit_report, ReportFormat, RunReport};
pub use runner::{load_dataset, run_experiment};
