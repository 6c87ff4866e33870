use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{generate_synthetic, CsvSource, Dataset, SyntheticSpec};
use crate::metrics::{MetricKind, MetricSpec};
use crate::milp::MilpConfig;
use crate::multiplicity::{PoolOptions, ThresholdMode};
use crate::trainer::TrainConfig;

use super::AuditError;

pub const DEFAULT_EPSILONS: [f64; 5] = [0.001, 0.005, 0.01, 0.02, 0.05];
pub const DEFAULT_DELTAS: [f64; 4] = [0.05, 0.1, 0.2, 0.3];
/// The (epsilon, delta) cell solved exactly unless configured otherwise.
pub const DEFAULT_MILP_CELL: (f64, f64) = (0.01, 0.2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv(CsvSource),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MilpCell {
    pub epsilon: f64,
    pub delta: f64,
}

fn default_epsilons() -> Vec<f64> {
    DEFAULT_EPSILONS.to_vec()
}

fn default_deltas() -> Vec<f64> {
    DEFAULT_DELTAS.to_vec()
}

fn default_metrics() -> Vec<MetricSpec> {
    MetricKind::ALL.iter().map(|&k| MetricSpec::new(k)).collect()
}

fn default_milp_cells() -> Vec<MilpCell> {
    vec![MilpCell {
        epsilon: DEFAULT_MILP_CELL.0,
        delta: DEFAULT_MILP_CELL.1,
    }]
}

fn default_true() -> bool {
    true
}

/// Everything an audit run needs. Unset fields take the documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    #[serde(default)]
    pub data: Option<DataSource>,
    /// Separate evaluation sample with the training columns.
    #[serde(default)]
    pub eval_csv: Option<PathBuf>,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricSpec>,
    #[serde(default = "default_epsilons")]
    pub epsilon_grid: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub delta_grid: Vec<f64>,
    /// Candidate thresholds; `None` aligns them to the delta grid.
    #[serde(default)]
    pub threshold_mode: Option<ThresholdMode>,
    #[serde(default)]
    pub trainer: TrainConfig,
    #[serde(default)]
    pub milp: MilpConfig,
    /// Run the exact solver on these cells.
    #[serde(default = "default_milp_cells")]
    pub milp_cells: Vec<MilpCell>,
    /// Run the exact solver on every (epsilon, delta) cell.
    #[serde(default)]
    pub milp_full_grid: bool,
    /// Feed loss-feasible solver solutions back into the candidate pool.
    #[serde(default = "default_true")]
    pub harvest: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn check_grid(name: &str, grid: &[f64], ok: impl Fn(f64) -> bool, range: &str) -> Result<(), AuditError> {
    if grid.is_empty() {
        return Err(AuditError::Config(format!("{name} must not be empty")));
    }
    if let Some(v) = grid.iter().find(|v| !ok(**v)) {
        return Err(AuditError::Config(format!("{name} values must be {range}, got {v}")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AuditError::Config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl AuditConfig {
    pub fn from_json(text: &str) -> Result<Self, AuditError> {
        serde_json::from_str(text).map_err(|e| AuditError::Config(format!("invalid config: {e}")))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, AuditError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| AuditError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(config)
    }

    /// Makes relative data paths relative to `base`.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !base.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        if let Some(DataSource::Csv(src)) = &mut self.data {
            fix(&mut src.path);
        }
        if let Some(p) = &mut self.eval_csv {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), AuditError> {
        check_grid("epsilon_grid", &self.epsilon_grid, |e| e > 0.0 && e.is_finite(), "positive")?;
        check_grid("delta_grid", &self.delta_grid, |d| d > 0.0 && d < 1.0, "in (0, 1)")?;
        if self.metrics.is_empty() {
            return Err(AuditError::Config("metrics must not be empty".into()));
        }
        for m in &self.metrics {
            m.validate().map_err(|e| AuditError::Config(e.to_string()))?;
        }
        self.pool_options()?;
        if let Some(mode) = &self.threshold_mode {
            mode.validate().map_err(|e| AuditError::Config(e.to_string()))?;
        }
        self.trainer
            .validate()
            .map_err(|e| AuditError::Config(e.to_string()))?;
        self.milp.validate().map_err(|e| AuditError::Config(e.to_string()))?;
        for c in &self.milp_cells {
            if !(c.epsilon > 0.0 && c.delta > 0.0 && c.delta < 1.0) {
                return Err(AuditError::Config(format!(
                    "milp cell ({}, {}) needs epsilon > 0 and delta in (0, 1)",
                    c.epsilon, c.delta
                )));
            }
        }
        if let Some(DataSource::Synthetic(spec)) = &self.data {
            spec.validate().map_err(|e| AuditError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Metric caching options implied by the configured metrics.
    pub fn pool_options(&self) -> Result<PoolOptions, AuditError> {
        let mut opts = PoolOptions::default();
        let mut bins = None;
        let mut ties = None;
        for m in &self.metrics {
            match m.kind {
                MetricKind::Ece => {
                    if bins.is_some_and(|b| b != m.ece_bins) {
                        return Err(AuditError::Config("all ece metrics must use the same bin count".into()));
                    }
                    bins = Some(m.ece_bins);
                }
                MetricKind::AucError => {
                    if ties.is_some_and(|t| t != m.auc_ties) {
                        return Err(AuditError::Config("all auc metrics must use the same tie rule".into()));
                    }
                    ties = Some(m.auc_ties);
                }
                MetricKind::LogLoss => {}
            }
        }
        opts.ece_bins = bins.unwrap_or(opts.ece_bins);
        opts.auc_ties = ties.unwrap_or(opts.auc_ties);
        Ok(opts)
    }

    pub fn threshold_mode(&self) -> ThresholdMode {
        self.threshold_mode.clone().unwrap_or_else(|| ThresholdMode::Aligned {
            deltas: self.delta_grid.clone(),
        })
    }

    /// Cells the exact solver runs on.
    pub fn exact_cells(&self) -> Vec<MilpCell> {
        if self.milp_full_grid {
            self.epsilon_grid
                .iter()
                .flat_map(|&epsilon| self.delta_grid.iter().map(move |&delta| MilpCell { epsilon, delta }))
                .collect()
        } else {
            self.milp_cells.clone()
        }
    }

    /// Hex SHA-256 of the canonical JSON form, output location excluded.
    pub fn sha256(&self) -> String {
        let canonical = Self {
            output_dir: None,
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }

    /// Loads the training data and the evaluation sample.
    pub fn load_data(&self) -> Result<(Dataset, Option<Dataset>), AuditError> {
        let data = match &self.data {
            None => return Err(AuditError::Config("no data source configured".into())),
            Some(DataSource::Csv(src)) => src.load()?,
            Some(DataSource::Synthetic(spec)) => generate_synthetic(spec)?,
        };
        let eval = match (&self.eval_csv, &self.data) {
            (None, _) => None,
            (Some(path), Some(DataSource::Csv(src))) => Some(
                CsvSource {
                    path: path.clone(),
                    ..src.clone()
                }
                .load()?,
            ),
            (Some(path), _) => Some(
                crate::dataset::load_csv(path, "label", None, "1")
                    .map_err(|e| AuditError::Config(format!("evaluation csv {}: {e}", path.display())))?,
            ),
        };
        if self.standardize {
            let scaled = data.standardized();
            let eval = eval.map(|e| e.standardized_like(&data));
            return Ok((scaled, eval));
        }
        Ok((data, eval))
    }
}
