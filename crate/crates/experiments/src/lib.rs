//! Experiment runner for the reverse-time SMC models: configuration files,
//! deterministic replicate seeding, CSV output and summaries.

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
pub mod summary;

pub use config::{ExperimentConfig, ExperimentKind};
pub use output::{read_rows, write_rows, ResultRow};
pub use runner::{replicate_seed, run_experiment};
pub use summary::{summarize, SummaryRow};

/// A configuration problem; reported with exit code 2.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] revsmc::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
