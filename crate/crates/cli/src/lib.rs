//! Batch runner for measure-pair scenarios: loads a config, runs the
//! selected verification suites and writes a JSON report plus CSV profiles.

mod config;
mod report;
mod run;
mod scenarios;

pub use config::{
    validate, ConfigFile, Diagnostics, EpsilonMode, ExperimentConfig, Outputs, Suite, Systems,
    Tolerances, DEPTH_CAP, TRUNCATION_MARGIN,
};
pub use report::{Check, Classification, Report, SCHEMA};
pub use run::{random_small_measure, run};
pub use scenarios::{catalog, lookup, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] sqfnlab_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Csv(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}

/// Applies `SQFNLAB_THREADS` to the global pool; unset means rayon's default.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("SQFNLAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}
