use std::collections::HashMap;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{row_key, Dataset};
use crate::metrics::{AucTies, MetricValues, DEFAULT_ECE_BINS};
use crate::model::LinearModel;
use crate::trainer::{solve_candidate, Direction, Objective, ScoreConstraint, TrainConfig};

use super::MultiplicityError;

/// Threshold grid used in the published audits.
pub const DEFAULT_GRID: [f64; 11] = [0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99];

/// Targets within this distance of the baseline prediction are skipped.
const SKIP_NEAR_BASELINE: f64 = 1e-6;

/// How candidate thresholds are chosen for each example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdMode {
    /// A fixed set of probabilities shared by all examples.
    Grid { probabilities: Vec<f64> },
    /// Targets `g0(x_i) - delta` and `g0(x_i) + delta` for each delta.
    Aligned { deltas: Vec<f64> },
}

impl Default for ThresholdMode {
    fn default() -> Self {
        ThresholdMode::Grid {
            probabilities: DEFAULT_GRID.to_vec(),
        }
    }
}

impl ThresholdMode {
    pub fn aligned(delta: f64) -> Self {
        ThresholdMode::Aligned {
            deltas: vec![delta],
        }
    }

    pub fn validate(&self) -> Result<(), MultiplicityError> {
        let (name, values) = match self {
            ThresholdMode::Grid { probabilities } => ("probabilities", probabilities),
            ThresholdMode::Aligned { deltas } => ("deltas", deltas),
        };
        if values.is_empty() || values.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(MultiplicityError::InvalidInput(format!(
                "threshold {name} must be nonempty and inside (0, 1)"
            )));
        }
        Ok(())
    }

    /// Targets for an example with baseline prediction `p0`, ascending, with
    /// the direction of each constraint.
    pub fn targets(&self, p0: f64) -> Vec<(f64, Direction)> {
        let raw: Vec<f64> = match self {
            ThresholdMode::Grid { probabilities } => probabilities.clone(),
            ThresholdMode::Aligned { deltas } => deltas
                .iter()
                .flat_map(|d| [p0 - d, p0 + d])
                .map(|p| p.clamp(crate::trainer::THRESHOLD_CLAMP, 1.0 - crate::trainer::THRESHOLD_CLAMP))
                .collect(),
        };
        let mut out: Vec<(f64, Direction)> = raw
            .into_iter()
            .filter(|p| (p - p0).abs() > SKIP_NEAR_BASELINE)
            .map(|p| {
                let dir = if p < p0 {
                    Direction::AtMost
                } else {
                    Direction::AtLeast
                };
                (p, dir)
            })
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.dedup_by(|a, b| a.0 == b.0);
        out
    }
}

/// Where a pool member came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Baseline,
    Candidate {
        example_index: usize,
        threshold_probability: f64,
        direction: Direction,
    },
    /// Loss-feasible integer solution found by the discrepancy solver.
    Oa { iteration: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolMember {
    pub provenance: Provenance,
    /// Metric values on the training data.
    pub metrics: MetricValues,
    #[serde(default)]
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFailure {
    pub example_index: usize,
    pub threshold_probability: f64,
    pub message: String,
}

/// Options that fix how cached metrics are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolOptions {
    pub ece_bins: usize,
    pub auc_ties: AucTies,
}

impl Default for PoolOptions {
    fn default() -> Self {
        Self {
            ece_bins: DEFAULT_ECE_BINS,
            auc_ties: AucTies::Strict,
        }
    }
}

/// Trained models with cached training metrics and cached predictions on an
/// evaluation sample. Member 0 is always the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub(crate) models: Vec<LinearModel>,
    pub(crate) members: Vec<PoolMember>,
    /// `predictions[m][i]`: member m on evaluation example i.
    pub(crate) predictions: Vec<Vec<f64>>,
    pub(crate) options: PoolOptions,
    pub(crate) mode: ThresholdMode,
    pub(crate) failures: Vec<CandidateFailure>,
    pub(crate) eval_groups: Option<Vec<String>>,
    /// For each evaluation example, the example whose candidates it shares.
    pub(crate) representatives: Vec<usize>,
}

impl CandidatePool {
    /// A pool holding only the baseline.
    pub fn from_baseline(
        train: &Dataset,
        eval: &Dataset,
        baseline: &LinearModel,
        mode: ThresholdMode,
        options: PoolOptions,
    ) -> Result<Self, MultiplicityError> {
        baseline.check_dim(train.dim())?;
        baseline.check_dim(eval.dim())?;
        if train.feature_names() != eval.feature_names() {
            return Err(MultiplicityError::InvalidInput(
                "training and evaluation data have different columns".into(),
            ));
        }
        let mut pool = Self {
            models: Vec::new(),
            members: Vec::new(),
            predictions: Vec::new(),
            options,
            mode,
            failures: Vec::new(),
            eval_groups: eval.groups().map(<[String]>::to_vec),
            representatives: crate::dataset::duplicate_representatives(eval),
        };
        pool.push(baseline.clone(), Provenance::Baseline, 0, train, eval)?;
        Ok(pool)
    }

    /// Appends a model, computing its metrics and predictions.
    pub fn push(
        &mut self,
        model: LinearModel,
        provenance: Provenance,
        iterations: usize,
        train: &Dataset,
        eval: &Dataset,
    ) -> Result<usize, MultiplicityError> {
        let metrics = MetricValues::compute(&model, train, self.options.ece_bins, self.options.auc_ties)?;
        let predictions = model.predictions(eval)?;
        self.models.push(model);
        self.members.push(PoolMember {
            provenance,
            metrics,
            iterations,
        });
        self.predictions.push(predictions);
        Ok(self.models.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn baseline(&self) -> &LinearModel {
        &self.models[0]
    }

    pub fn model(&self, index: usize) -> &LinearModel {
        &self.models[index]
    }

    pub fn models(&self) -> &[LinearModel] {
        &self.models
    }

    pub fn members(&self) -> &[PoolMember] {
        &self.members
    }

    pub fn predictions(&self, index: usize) -> &[f64] {
        &self.predictions[index]
    }

    pub fn baseline_predictions(&self) -> &[f64] {
        &self.predictions[0]
    }

    pub fn n_eval(&self) -> usize {
        self.predictions[0].len()
    }

    pub fn options(&self) -> PoolOptions {
        self.options
    }

    pub fn mode(&self) -> &ThresholdMode {
        &self.mode
    }

    pub fn failures(&self) -> &[CandidateFailure] {
        &self.failures
    }

    pub fn eval_groups(&self) -> Option<&[String]> {
        self.eval_groups.as_deref()
    }

    pub fn representatives(&self) -> &[usize] {
        &self.representatives
    }
}

/// Builds a pool whose candidates target the training examples themselves.
pub fn build_pool(
    data: &Dataset,
    baseline: &LinearModel,
    thresholds: &ThresholdMode,
    config: &TrainConfig,
) -> Result<CandidatePool, MultiplicityError> {
    build_pool_with(data, data, baseline, thresholds, config, PoolOptions::default())
}

/// Builds a pool with losses measured on `train` and candidates targeting
/// every example of `eval`. Identical evaluation rows share one set of
/// candidates. Training failures are recorded, not fatal.
pub fn build_pool_with(
    train: &Dataset,
    eval: &Dataset,
    baseline: &LinearModel,
    thresholds: &ThresholdMode,
    config: &TrainConfig,
    options: PoolOptions,
) -> Result<CandidatePool, MultiplicityError> {
    thresholds.validate()?;
    config.validate()?;
    let mut pool = CandidatePool::from_baseline(train, eval, baseline, thresholds.clone(), options)?;
    let objective = Objective::new(train, config.l2_penalty);

    let mut unique: Vec<usize> = Vec::new();
    let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
    for (i, x) in eval.rows().enumerate() {
        if seen.insert(row_key(x), ()).is_none() {
            unique.push(i);
        }
    }
    let base_pred = pool.baseline_predictions().to_vec();
    info!(
        "training candidates for {} unique rows ({} examples)",
        unique.len(),
        eval.n()
    );

    type Chain = (Vec<(LinearModel, Provenance, usize)>, Vec<CandidateFailure>);
    let chains: Vec<Chain> = unique
        .par_iter()
        .map(|&i| {
            let x = eval.row(i);
            let mut trained = Vec::new();
            let mut failures = Vec::new();
            let mut previous: Option<(Direction, Vec<f64>)> = None;
            for (p, direction) in thresholds.targets(base_pred[i]) {
                let constraint = match ScoreConstraint::new(i, direction, p) {
                    Ok(c) => c,
                    Err(e) => {
                        failures.push(CandidateFailure {
                            example_index: i,
                            threshold_probability: p,
                            message: e.to_string(),
                        });
                        continue;
                    }
                };
                // Warm-start from the previous threshold on the same side of
                // the baseline, otherwise from the baseline itself.
                let warm = match &previous {
                    Some((dir, w)) if *dir == direction => w.as_slice(),
                    _ => baseline.coefficients(),
                };
                match solve_candidate(&objective, x, &constraint, Some(warm), config) {
                    Ok(t) => {
                        debug!("example {i} p={p}: {} iterations", t.iterations);
                        previous = Some((direction, t.model.coefficients().to_vec()));
                        trained.push((
                            t.model,
                            Provenance::Candidate {
                                example_index: i,
                                threshold_probability: constraint.threshold_probability,
                                direction,
                            },
                            t.iterations,
                        ));
                    }
                    Err(e) => {
                        warn!("candidate for example {i} at p={p} failed: {e}");
                        failures.push(CandidateFailure {
                            example_index: i,
                            threshold_probability: p,
                            message: e.to_string(),
                        });
                    }
                }
            }
            (trained, failures)
        })
        .collect();

    let evaluated: Vec<_> = chains
        .into_par_iter()
        .map(|(trained, failures)| {
            let rows: Result<Vec<_>, MultiplicityError> = trained
                .into_iter()
                .map(|(model, prov, iters)| {
                    let metrics = MetricValues::compute(&model, train, options.ece_bins, options.auc_ties)?;
                    let predictions = model.predictions(eval)?;
                    Ok((model, PoolMember { provenance: prov, metrics, iterations: iters }, predictions))
                })
                .collect();
            rows.map(|r| (r, failures))
        })
        .collect::<Result<_, _>>()?;
    for (rows, failures) in evaluated {
        for (model, member, predictions) in rows {
            pool.models.push(model);
            pool.members.push(member);
            pool.predictions.push(predictions);
        }
        pool.failures.extend(failures);
    }
    info!(
        "pool has {} members, {} training failures",
        pool.len(),
        pool.failures.len()
    );
    Ok(pool)
}
