//! Experiment harness around the `forgeset` library: config-driven data
//! generation, pretraining, forget set selection, unlearning evaluation and
//! the oracle, transfer, coreset and mixture studies.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod streams;
pub mod workspace;

pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, CliResult};
pub use workspace::Run;
