//! Batch front end: ingestion, configuration, fitting, persisted draws and
//! the summaries computed from them.

pub mod config;
pub mod dataset;
mod experiment;
mod run;
pub mod store;

pub use config::{ConfigError, ResolvedPriors, RunConfig};
pub use dataset::{ingest, ingest_reader, ColumnKind, Dataset, Encoding, IngestError, ResponseData, ResponseKind, Schema};
pub use experiment::{ess_experiment, EssConfig, EssReport, ParameterizationEss};
pub use run::{
    calibrate_report, fit, load_run, pd_report, predict_draws, predict_stored, prepare, waic_report, CalibrationPair,
    CalibrationReport, FitOutput, PdReport, PdRequest, Predictions, Prepared, Summary,
};
pub use store::{read_draws, read_manifest, DrawRecord, Manifest, StoreError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("ingest error: {0}")]
    Ingest(#[from] IngestError),
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("draw store error: {0}")]
    Store(#[from] StoreError),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Ingest(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Store(_) | CliError::Output(_) => 1,
        }
    }
}

impl From<crate::error::Error> for CliError {
    fn from(e: crate::error::Error) -> Self {
        match e {
            crate::error::Error::InvalidParameter(msg) => CliError::Config(ConfigError(msg)),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
