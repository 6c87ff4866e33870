//! End-to-end audits: configuration, report assembly, plots and the command
//! implementations behind the `mpaudit` binary.

mod commands;
mod config;
mod plots;
mod replicate;
mod report;

use std::path::PathBuf;

pub use commands::{run_audit, run_export_mps, run_gen_synth, run_train, AuditOutcome, TrainSummary};
pub use config::{
    AuditConfig, DataSource, MilpCell, DEFAULT_DELTAS, DEFAULT_EPSILONS, DEFAULT_MILP_CELL,
};
pub use plots::{max_deviation_svg, viable_range_svg};
pub use replicate::{
    run_replicate, ConditionResult, ReplicateOptions, ReplicationReport, Study, StudyResult,
    SEPARABILITY_BAND,
};
pub use report::{
    AuditReport, BaselineSummary, ExactCell, MetricsBlock, RangeSummary, RunMetadata,
    UniquenessRow, METRICS_SCHEMA, REPORT_SCHEMA, SCHEMA_VERSION,
};

use crate::dataset::DatasetError;
use crate::milp::MilpError;
use crate::model::ModelError;
use crate::multiplicity::MultiplicityError;
use crate::trainer::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("training failed: {0}")]
    Train(#[from] TrainError),
    #[error(transparent)]
    Multiplicity(#[from] MultiplicityError),
    #[error("solver failed: {0}")]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl AuditError {
    /// Process exit code: 2 for bad input, 3 for solver or i/o failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            AuditError::Config(_) | AuditError::Dataset(_) | AuditError::Model(_) => 2,
            AuditError::Multiplicity(MultiplicityError::InvalidInput(_)) => 2,
            AuditError::Milp(MilpError::InvalidInput(_) | MilpError::InvalidBounds(_)) => 2,
            _ => 3,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> AuditError {
    let path = path.into();
    move |source| AuditError::Io { path, source }
}
