use serde::{Deserialize, Serialize};

use crate::milp::SolveStatus;
use super::MilpCell;
use crate::multiplicity::{CandidateFailure, EstimateKind, MultiplicityReport};

/// Bumped whenever a field of the report changes meaning or disappears.
pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_sha256: String,
    pub crate_version: String,
    pub seed: u64,
    pub n_train: usize,
    pub n_eval: usize,
    pub feature_names: Vec<String>,
    pub pool_size: usize,
    /// Pool members added from exact-solver solutions.
    pub harvested: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub loss: f64,
    pub auc: f64,
    pub ece: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub coefficients: Vec<f64>,
    pub train: MetricsBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<MetricsBlock>,
}

/// Summary of the viable ranges at one epsilon; per-example values are in
/// the CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSummary {
    pub metric: String,
    pub epsilon: f64,
    pub estimate_kind: EstimateKind,
    pub mean_width: f64,
    pub max_width: f64,
    pub n_unbracketed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactCell {
    pub epsilon: f64,
    pub delta: f64,
    pub status: SolveStatus,
    /// Best number of moved evaluation examples known for the cell.
    pub deviations: usize,
    pub discrepancy: f64,
    /// Upper bound on the discrepancy; equals it when the status is optimal.
    pub discrepancy_bound: f64,
    pub gap: f64,
    pub discrepancy_lower_bound: f64,
    pub coef_bound: f64,
    pub nodes: usize,
    pub cuts: usize,
    pub lp_iterations: usize,
    pub coefficients: Option<Vec<f64>>,
}

/// Ambiguity among examples sharing a duplicate count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessRow {
    pub duplicate_count: String,
    pub n_examples: usize,
    pub n_ambiguous: usize,
    pub ambiguity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: String,
    pub run: RunMetadata,
    pub baseline: BaselineSummary,
    pub sweeps: Vec<MultiplicityReport>,
    pub viable_ranges: Vec<RangeSummary>,
    pub exact_discrepancy: Vec<ExactCell>,
    /// Loss level set at `uniqueness_cell`.
    pub uniqueness: Vec<UniquenessRow>,
    pub uniqueness_cell: MilpCell,
    pub candidate_failures: Vec<CandidateFailure>,
    /// Set when a solver limit was hit or a candidate failed to train.
    pub partial: bool,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Bucket label for a duplicate count.
pub(crate) fn duplicate_bucket(count: usize) -> &'static str {
    match count {
        1 => "1",
        2 => "2",
        3..=5 => "3-5",
        6..=10 => "6-10",
        _ => "11+",
    }
}

pub(crate) const DUPLICATE_BUCKETS: [&str; 5] = ["1", "2", "3-5", "6-10", "11+"];

/// JSON schema every `report.json` validates against.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");
/// JSON schema for `metrics.json`.
pub const METRICS_SCHEMA: &str = include_str!("../../schema/metrics.schema.json");
