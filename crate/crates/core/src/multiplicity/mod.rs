//! Candidate pools and the multiplicity measures computed from them.

mod archive;
mod measures;
mod pool;

use std::path::PathBuf;

pub use archive::{POOL_COEFFICIENTS, POOL_INDEX};
pub use measures::{
    ambiguity, discrepancy_lower_bound, filter_level_set, group_indices, max_deviations, sweep,
    viable_ranges, Ambiguity, DiscrepancyBound, EstimateKind, GroupCell, LevelSetSpec,
    MultiplicityReport, SweepCell, ViableRange, DEVIATION_TOL,
};
pub(crate) use measures::deviates;
pub use pool::{
    build_pool, build_pool_with, CandidateFailure, CandidatePool, PoolMember, PoolOptions,
    Provenance, ThresholdMode, DEFAULT_GRID,
};

use crate::metrics::MetricError;
use crate::model::ModelError;
use crate::trainer::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum MultiplicityError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    InvalidInput(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed pool index: {0}")]
    Json(#[from] serde_json::Error),
    #[error("pool archive: {0}")]
    Archive(String),
}
