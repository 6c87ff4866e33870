//! Paired synthetic conditions run across seeds, with direction verdicts.

use std::collections::BTreeMap;
use std::str::FromStr;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{generate_synthetic, SyntheticSpec, GROUP_MAJORITY, GROUP_MINORITY};
use crate::metrics::MetricSpec;
use crate::multiplicity::{ambiguity, build_pool, deviates, group_indices, LevelSetSpec, ThresholdMode};
use crate::trainer::{train_baseline, TrainConfig};

use super::AuditError;

/// Target and half-width for the mean ambiguity of the high-noise
/// separability condition.
pub const SEPARABILITY_BAND: (f64, f64) = (0.21, 0.10);

const SEPARABILITY_SIGMAS: (f64, f64) = (4.0, 10.0);
const OUTLIER_SIGMA: f64 = 2.0;
const OUTLIER_MARGINS: (f64, f64) = (1.0, 30.0);
const RATIO_SIGMA: f64 = 1.0;
const RATIOS: (f64, f64) = (10.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Separability,
    Outliers,
    Ratio,
}

impl Study {
    pub const ALL: [Study; 3] = [Study::Separability, Study::Outliers, Study::Ratio];

    fn conditions(self, seed: u64) -> [(String, SyntheticSpec); 2] {
        match self {
            Study::Separability => {
                let (a, b) = SEPARABILITY_SIGMAS;
                [
                    (format!("sigma={a}"), SyntheticSpec::separability(a, seed)),
                    (format!("sigma={b}"), SyntheticSpec::separability(b, seed)),
                ]
            }
            Study::Outliers => {
                let (small, large) = OUTLIER_MARGINS;
                [
                    ("small_margin".into(), SyntheticSpec::outliers(OUTLIER_SIGMA, small, seed)),
                    ("large_margin".into(), SyntheticSpec::outliers(OUTLIER_SIGMA, large, seed)),
                ]
            }
            Study::Ratio => {
                let (a, b) = RATIOS;
                [
                    (format!("ratio={a}:1"), SyntheticSpec::majority_minority(RATIO_SIGMA, a, seed)),
                    (format!("ratio={b}:1"), SyntheticSpec::majority_minority(RATIO_SIGMA, b, seed)),
                ]
            }
        }
    }

    fn claim(self) -> &'static str {
        match self {
            Study::Separability => "mean ambiguity rises with cluster spread",
            Study::Outliers => "small-margin outliers give at least the ambiguity of large-margin ones",
            Study::Ratio => "the minority group is more ambiguous than the majority at 10:1",
        }
    }
}

impl FromStr for Study {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "separability" => Ok(Study::Separability),
            "outliers" => Ok(Study::Outliers),
            "ratio" => Ok(Study::Ratio),
            other => Err(AuditError::Config(format!(
                "unknown study `{other}` (expected separability, outliers or ratio)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOptions {
    pub seeds: Vec<u64>,
    pub epsilon: f64,
    pub delta: f64,
    pub trainer: TrainConfig,
}

impl Default for ReplicateOptions {
    fn default() -> Self {
        Self {
            seeds: (0..10).collect(),
            epsilon: 0.05,
            delta: 0.2,
            trainer: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub label: String,
    pub per_seed: Vec<f64>,
    pub mean: f64,
    /// Per-group ambiguity per seed, for data with groups.
    pub groups: BTreeMap<String, Vec<f64>>,
    pub group_means: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: Study,
    pub claim: String,
    pub conditions: Vec<ConditionResult>,
    pub verdict: bool,
    /// Whether the second condition's mean lies in the reference band; only
    /// for the separability study.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_band: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub options: ReplicateOptions,
    pub studies: Vec<StudyResult>,
}

impl ReplicationReport {
    pub fn all_pass(&self) -> bool {
        self.studies
            .iter()
            .all(|s| s.verdict && s.in_band.unwrap_or(true))
    }
}

struct SeedRun {
    overall: f64,
    groups: BTreeMap<String, f64>,
}

fn run_seed(spec: &SyntheticSpec, options: &ReplicateOptions) -> Result<SeedRun, AuditError> {
    let data = generate_synthetic(spec)?;
    let baseline = train_baseline(&data, &options.trainer)?.model;
    let pool = build_pool(&data, &baseline, &ThresholdMode::aligned(options.delta), &options.trainer)?;
    let level_set = LevelSetSpec::for_pool(&pool, MetricSpec::log_loss(), options.epsilon)?;
    let amb = ambiguity(&pool, &level_set, options.delta)?;
    let groups = group_indices(&pool)
        .into_iter()
        .map(|(name, idx)| {
            let hits = idx
                .iter()
                .filter(|&&i| deviates(amb.per_example_max_deviation[i], options.delta))
                .count();
            (name, hits as f64 / idx.len() as f64)
        })
        .collect();
    Ok(SeedRun {
        overall: amb.value,
        groups,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn run_study(study: Study, options: &ReplicateOptions) -> Result<StudyResult, AuditError> {
    let runs: Vec<[SeedRun; 2]> = options
        .seeds
        .par_iter()
        .map(|&seed| {
            let [(_, a), (_, b)] = study.conditions(seed);
            Ok([run_seed(&a, options)?, run_seed(&b, options)?])
        })
        .collect::<Result<_, AuditError>>()?;

    let labels = study.conditions(0).map(|(label, _)| label);
    let conditions: Vec<ConditionResult> = labels
        .into_iter()
        .enumerate()
        .map(|(k, label)| {
            let per_seed: Vec<f64> = runs.iter().map(|r| r[k].overall).collect();
            let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in &runs {
                for (g, v) in &r[k].groups {
                    groups.entry(g.clone()).or_default().push(*v);
                }
            }
            let group_means = groups.iter().map(|(g, v)| (g.clone(), mean(v))).collect();
            ConditionResult {
                label,
                mean: mean(&per_seed),
                per_seed,
                groups,
                group_means,
            }
        })
        .collect();

    let (first, second) = (&conditions[0], &conditions[1]);
    let (verdict, in_band) = match study {
        Study::Separability => {
            let (target, width) = SEPARABILITY_BAND;
            (second.mean > first.mean, Some((second.mean - target).abs() <= width))
        }
        Study::Outliers => (first.mean >= second.mean, None),
        Study::Ratio => {
            let g = &first.group_means;
            let verdict = match (g.get(GROUP_MINORITY), g.get(GROUP_MAJORITY)) {
                (Some(minority), Some(majority)) => minority > majority,
                _ => false,
            };
            (verdict, None)
        }
    };
    info!(
        "{study:?}: {} = {:.3}, {} = {:.3}, verdict {verdict}",
        first.label, first.mean, second.label, second.mean
    );
    Ok(StudyResult {
        study,
        claim: study.claim().into(),
        conditions,
        verdict,
        in_band,
    })
}

/// Runs each study's two conditions over every seed.
pub fn run_replicate(studies: &[Study], options: &ReplicateOptions) -> Result<ReplicationReport, AuditError> {
    if options.seeds.is_empty() {
        return Err(AuditError::Config("at least one seed is required".into()));
    }
    if !(options.epsilon > 0.0 && options.delta > 0.0 && options.delta < 1.0) {
        return Err(AuditError::Config("replication needs epsilon > 0 and delta in (0, 1)".into()));
    }
    let studies = studies
        .iter()
        .map(|&s| run_study(s, options))
        .collect::<Result<_, _>>()?;
    Ok(ReplicationReport {
        options: options.clone(),
        studies,
    })
}
