use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::{MetricKind, MetricSpec};
use crate::trainer::{Direction, THRESHOLD_CLAMP};

use super::pool::{CandidatePool, Provenance};
use super::MultiplicityError;

/// Slack on the `>= delta` deviation test.
pub const DEVIATION_TOL: f64 = 1e-9;

/// A level set `M(g) <= M(g0) + epsilon` over one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSetSpec {
    pub metric: MetricSpec,
    pub epsilon: f64,
    pub baseline_value: f64,
}

impl LevelSetSpec {
    /// Level set of `pool` for `metric`, with the baseline value read from the
    /// pool's cache. The metric's binning and tie options must match the pool.
    pub fn for_pool(
        pool: &CandidatePool,
        metric: MetricSpec,
        epsilon: f64,
    ) -> Result<Self, MultiplicityError> {
        if !(epsilon > 0.0) {
            return Err(MultiplicityError::InvalidInput(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let opts = pool.options();
        let mismatch = match metric.kind {
            MetricKind::Ece => metric.ece_bins != opts.ece_bins,
            MetricKind::AucError => metric.auc_ties != opts.auc_ties,
            MetricKind::LogLoss => false,
        };
        if mismatch {
            return Err(MultiplicityError::InvalidInput(format!(
                "metric {metric:?} does not match the pool's cached metric options {opts:?}"
            )));
        }
        Ok(Self {
            metric,
            epsilon,
            baseline_value: pool.members()[0].metrics.get(metric.kind),
        })
    }

    pub fn bound(&self) -> f64 {
        self.baseline_value + self.epsilon
    }
}

/// Indices of pool members inside the level set. Always contains 0.
pub fn filter_level_set(pool: &CandidatePool, spec: &LevelSetSpec) -> Vec<usize> {
    let bound = spec.bound();
    pool.members()
        .iter()
        .enumerate()
        .filter(|(i, m)| *i == 0 || m.metrics.get(spec.metric.kind) <= bound)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    ExactForLoss,
    Conservative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViableRange {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub baseline: Vec<f64>,
    /// Whether the thresholds tried for the example pin both range ends down
    /// to the grid resolution.
    pub bracketed: Vec<bool>,
    pub estimate_kind: EstimateKind,
}

impl ViableRange {
    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.lo.len()).map(|i| self.width(i)).collect()
    }
}

/// Smallest and largest prediction for each evaluation example over the
/// level set.
pub fn viable_ranges(pool: &CandidatePool, spec: &LevelSetSpec) -> ViableRange {
    let members = filter_level_set(pool, spec);
    let baseline = pool.baseline_predictions().to_vec();
    let mut lo = baseline.clone();
    let mut hi = baseline.clone();
    for &m in &members {
        for (i, &p) in pool.predictions(m).iter().enumerate() {
            lo[i] = lo[i].min(p);
            hi[i] = hi[i].max(p);
        }
    }
    let bracketed = bracketing(pool, spec, &lo, &hi);
    let exact = spec.metric.kind == MetricKind::LogLoss
        && pool.failures().is_empty()
        && bracketed.iter().all(|&b| b);
    ViableRange {
        lo,
        hi,
        baseline,
        bracketed,
        estimate_kind: if exact {
            EstimateKind::ExactForLoss
        } else {
            EstimateKind::Conservative
        },
    }
}

fn bracketing(pool: &CandidatePool, spec: &LevelSetSpec, lo: &[f64], hi: &[f64]) -> Vec<bool> {
    // Per representative: (closest outside target below, clamp reached) for
    // each side.
    #[derive(Default, Clone, Copy)]
    struct Sides {
        low_closed: bool,
        high_closed: bool,
    }
    let n = pool.n_eval();
    let mut outside: BTreeMap<usize, Vec<(f64, Direction, bool)>> = BTreeMap::new();
    let bound = spec.bound();
    for m in pool.members() {
        if let Provenance::Candidate {
            example_index,
            threshold_probability,
            direction,
        } = m.provenance
        {
            let inside = m.metrics.get(spec.metric.kind) <= bound;
            outside
                .entry(example_index)
                .or_default()
                .push((threshold_probability, direction, inside));
        }
    }
    let clamp_lo = THRESHOLD_CLAMP * (1.0 + 1e-9);
    let clamp_hi = 1.0 - THRESHOLD_CLAMP * (1.0 + 1e-9);
    (0..n)
        .map(|i| {
            let rep = pool.representatives()[i];
            let mut s = Sides::default();
            for &(p, dir, inside) in outside.get(&rep).map(Vec::as_slice).unwrap_or(&[]) {
                match dir {
                    Direction::AtMost => {
                        if (!inside && p < lo[i]) || (inside && p <= clamp_lo) {
                            s.low_closed = true;
                        }
                    }
                    Direction::AtLeast => {
                        if (!inside && p > hi[i]) || (inside && p >= clamp_hi) {
                            s.high_closed = true;
                        }
                    }
                }
            }
            s.low_closed && s.high_closed
        })
        .collect()
}

/// Per-example largest `|g(x_i) - g0(x_i)|` over the given members.
pub fn max_deviations(pool: &CandidatePool, members: &[usize]) -> Vec<f64> {
    let base = pool.baseline_predictions();
    let mut dev = vec![0.0_f64; base.len()];
    for &m in members {
        for (i, (&p, &b)) in pool.predictions(m).iter().zip(base).enumerate() {
            dev[i] = dev[i].max((p - b).abs());
        }
    }
    dev
}

pub(crate) fn deviates(deviation: f64, delta: f64) -> bool {
    deviation >= delta - DEVIATION_TOL
}

fn check_delta(delta: f64) -> Result<(), MultiplicityError> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(MultiplicityError::InvalidInput(format!(
            "delta must be positive, got {delta}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ambiguity {
    pub value: f64,
    pub per_example_max_deviation: Vec<f64>,
}

/// Fraction of examples whose prediction can move by at least `delta`.
pub fn ambiguity(
    pool: &CandidatePool,
    spec: &LevelSetSpec,
    delta: f64,
) -> Result<Ambiguity, MultiplicityError> {
    check_delta(delta)?;
    let dev = max_deviations(pool, &filter_level_set(pool, spec));
    Ok(Ambiguity {
        value: fraction_deviating(&dev, delta),
        per_example_max_deviation: dev,
    })
}

fn fraction_deviating(dev: &[f64], delta: f64) -> f64 {
    dev.iter().filter(|&&d| deviates(d, delta)).count() as f64 / dev.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyBound {
    pub value: f64,
    /// Pool index of the model achieving the bound.
    pub model_index: usize,
}

/// Largest fraction of examples moved by at least `delta` by a single
/// level-set member.
pub fn discrepancy_lower_bound(
    pool: &CandidatePool,
    spec: &LevelSetSpec,
    delta: f64,
) -> Result<DiscrepancyBound, MultiplicityError> {
    check_delta(delta)?;
    Ok(discrepancy_over(pool, &filter_level_set(pool, spec), delta))
}

fn discrepancy_over(pool: &CandidatePool, members: &[usize], delta: f64) -> DiscrepancyBound {
    let base = pool.baseline_predictions();
    let mut best = DiscrepancyBound {
        value: 0.0,
        model_index: 0,
    };
    let mut best_count = 0usize;
    for &m in members {
        let count = pool
            .predictions(m)
            .iter()
            .zip(base)
            .filter(|(p, b)| deviates((*p - *b).abs(), delta))
            .count();
        if count > best_count {
            best_count = count;
            best.model_index = m;
        }
    }
    best.value = best_count as f64 / base.len() as f64;
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub epsilon: f64,
    pub delta: f64,
    pub ambiguity: f64,
    pub discrepancy_lower_bound: f64,
    pub discrepancy_model: usize,
    pub level_set_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCell {
    pub group: String,
    pub size: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub ambiguity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    pub metric: MetricSpec,
    pub estimate_kind: EstimateKind,
    pub baseline_value: f64,
    pub epsilon_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    /// Row-major over (epsilon, delta).
    pub cells: Vec<SweepCell>,
    /// One vector per epsilon.
    pub per_example_max_deviation: Vec<Vec<f64>>,
    pub group_breakdown: Vec<GroupCell>,
}

impl MultiplicityReport {
    pub fn cell(&self, epsilon_index: usize, delta_index: usize) -> &SweepCell {
        &self.cells[epsilon_index * self.delta_grid.len() + delta_index]
    }
}

fn check_grid(name: &str, grid: &[f64], upper: Option<f64>) -> Result<(), MultiplicityError> {
    let ok = !grid.is_empty()
        && grid.windows(2).all(|w| w[0] < w[1])
        && grid.iter().all(|&v| v > 0.0 && upper.is_none_or(|u| v < u));
    if ok {
        Ok(())
    } else {
        Err(MultiplicityError::InvalidInput(format!(
            "{name} must be nonempty, strictly increasing and in range: {grid:?}"
        )))
    }
}

/// Ambiguity and discrepancy lower bounds over an (epsilon, delta) grid.
pub fn sweep(
    pool: &CandidatePool,
    metric: MetricSpec,
    epsilon_grid: &[f64],
    delta_grid: &[f64],
) -> Result<MultiplicityReport, MultiplicityError> {
    check_grid("epsilon_grid", epsilon_grid, None)?;
    check_grid("delta_grid", delta_grid, None)?;
    let mut cells = Vec::new();
    let mut deviations = Vec::new();
    let mut group_breakdown = Vec::new();
    let groups = group_indices(pool);
    let mut estimate_kind = EstimateKind::ExactForLoss;
    let mut baseline_value = 0.0;

    for &epsilon in epsilon_grid {
        let spec = LevelSetSpec::for_pool(pool, metric, epsilon)?;
        baseline_value = spec.baseline_value;
        let members = filter_level_set(pool, &spec);
        let dev = max_deviations(pool, &members);
        if ambiguity_estimate_kind(pool, &spec) == EstimateKind::Conservative {
            estimate_kind = EstimateKind::Conservative;
        }
        for &delta in delta_grid {
            let bound = discrepancy_over(pool, &members, delta);
            cells.push(SweepCell {
                epsilon,
                delta,
                ambiguity: fraction_deviating(&dev, delta),
                discrepancy_lower_bound: bound.value,
                discrepancy_model: bound.model_index,
                level_set_size: members.len(),
            });
            for (name, idx) in &groups {
                let hits = idx.iter().filter(|&&i| deviates(dev[i], delta)).count();
                group_breakdown.push(GroupCell {
                    group: name.clone(),
                    size: idx.len(),
                    epsilon,
                    delta,
                    ambiguity: hits as f64 / idx.len() as f64,
                });
            }
        }
        deviations.push(dev);
    }
    Ok(MultiplicityReport {
        metric,
        estimate_kind,
        baseline_value,
        epsilon_grid: epsilon_grid.to_vec(),
        delta_grid: delta_grid.to_vec(),
        cells,
        per_example_max_deviation: deviations,
        group_breakdown,
    })
}

/// Ambiguity from candidates is exact only for the loss metric; other
/// metrics filter a loss-trained pool and give lower bounds.
fn ambiguity_estimate_kind(pool: &CandidatePool, spec: &LevelSetSpec) -> EstimateKind {
    if spec.metric.kind == MetricKind::LogLoss && pool.failures().is_empty() {
        EstimateKind::ExactForLoss
    } else {
        EstimateKind::Conservative
    }
}

/// Evaluation indices by group label, groups in sorted order.
pub fn group_indices(pool: &CandidatePool) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    if let Some(groups) = pool.eval_groups() {
        for (i, g) in groups.iter().enumerate() {
            out.entry(g.clone()).or_default().push(i);
        }
    }
    out
}
