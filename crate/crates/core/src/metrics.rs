//! Performance metrics. Every metric is reported lower-is-better so that
//! level sets are always `M(g) <= M(g0) + eps`.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::model::{LinearModel, ModelError};
use crate::numeric::{dot, sigmoid, softplus, CompensatedSum};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("AUC needs both classes (positives: {n_pos}, negatives: {n_neg})")]
    OneClassOnly { n_pos: usize, n_neg: usize },
    #[error("ECE needs at least one bin")]
    ZeroBins,
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    LogLoss,
    AucError,
    Ece,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::LogLoss, MetricKind::AucError, MetricKind::Ece];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::LogLoss => "log_loss",
            MetricKind::AucError => "auc_error",
            MetricKind::Ece => "ece",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How tied positive/negative pairs count towards AUC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AucTies {
    /// Ties count 0 (strict inequality).
    #[default]
    Strict,
    /// Ties count 1/2.
    HalfCredit,
}

pub const DEFAULT_ECE_BINS: usize = 10;

fn default_bins() -> usize {
    DEFAULT_ECE_BINS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub kind: MetricKind,
    #[serde(default = "default_bins")]
    pub ece_bins: usize,
    #[serde(default)]
    pub auc_ties: AucTies,
}

impl MetricSpec {
    pub fn new(kind: MetricKind) -> Self {
        Self {
            kind,
            ece_bins: DEFAULT_ECE_BINS,
            auc_ties: AucTies::Strict,
        }
    }

    pub fn log_loss() -> Self {
        Self::new(MetricKind::LogLoss)
    }

    pub fn auc_error() -> Self {
        Self::new(MetricKind::AucError)
    }

    pub fn ece(bins: usize) -> Self {
        Self {
            ece_bins: bins,
            ..Self::new(MetricKind::Ece)
        }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.ece_bins == 0 {
            return Err(MetricError::ZeroBins);
        }
        Ok(())
    }
}

/// Mean logistic loss `(1/n) sum log(1 + exp(-y <w, x>))`.
pub fn log_loss(model: &LinearModel, data: &Dataset) -> Result<f64, MetricError> {
    model.check_dim(data.dim())?;
    Ok(log_loss_raw(model.coefficients(), data))
}

pub(crate) fn log_loss_raw(w: &[f64], data: &Dataset) -> f64 {
    let mut acc = CompensatedSum::new();
    for (i, x) in data.rows().enumerate() {
        acc.add(softplus(-data.label(i) * dot(w, x)));
    }
    acc.value() / data.n() as f64
}

/// Gradient of [`log_loss`]: `(1/n) sum sigmoid(-y <w, x>) (-y x)`.
pub fn loss_gradient(model: &LinearModel, data: &Dataset) -> Result<Vec<f64>, MetricError> {
    model.check_dim(data.dim())?;
    Ok(loss_and_gradient_raw(model.coefficients(), data).1)
}

/// Loss and gradient in one pass over the data.
pub(crate) fn loss_and_gradient_raw(w: &[f64], data: &Dataset) -> (f64, Vec<f64>) {
    let d = data.dim();
    let mut loss = CompensatedSum::new();
    let mut grad = vec![CompensatedSum::new(); d];
    for (i, x) in data.rows().enumerate() {
        let y = data.label(i);
        let margin = y * dot(w, x);
        loss.add(softplus(-margin));
        let coef = -y * sigmoid(-margin);
        for (g, xj) in grad.iter_mut().zip(x) {
            g.add(coef * xj);
        }
    }
    let n = data.n() as f64;
    (loss.value() / n, grad.iter().map(|g| g.value() / n).collect())
}

/// Area under the ROC curve over the model's predictions.
pub fn auc(model: &LinearModel, data: &Dataset, ties: AucTies) -> Result<f64, MetricError> {
    let p = model.predictions(data)?;
    auc_from_predictions(&p, data.labels(), ties)
}

/// Sort-based AUC. Tied groups are handled as blocks so the result equals
/// the pairwise count exactly.
pub fn auc_from_predictions(
    predictions: &[f64],
    labels: &[i8],
    ties: AucTies,
) -> Result<f64, MetricError> {
    check_lengths(predictions, labels)?;
    let n_pos = labels.iter().filter(|&&y| y > 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::OneClassOnly { n_pos, n_neg });
    }
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));

    // Pair counts are integers (times two for half credit) so the sum is exact.
    let mut wins: u128 = 0;
    let mut tied: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let value = predictions[order[start]];
        let mut end = start;
        let (mut pos_here, mut neg_here) = (0u128, 0u128);
        while end < order.len() && predictions[order[end]] == value {
            if labels[order[end]] > 0 {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            end += 1;
        }
        wins += pos_here * neg_below;
        tied += pos_here * neg_here;
        neg_below += neg_here;
        start = end;
    }
    let pairs = (n_pos as u128 * n_neg as u128) as f64;
    Ok(match ties {
        AucTies::Strict => wins as f64 / pairs,
        AucTies::HalfCredit => (2 * wins + tied) as f64 / (2.0 * pairs),
    })
}

/// Expected calibration error with `bins` equal-width bins on [0, 1].
pub fn ece(model: &LinearModel, data: &Dataset, bins: usize) -> Result<f64, MetricError> {
    let p = model.predictions(data)?;
    ece_from_predictions(&p, data.labels(), bins)
}

/// Bin index of a probability: bin b covers [b/B, (b+1)/B), the last bin is
/// closed on the right.
pub fn ece_bin(p: f64, bins: usize) -> usize {
    ((p * bins as f64).floor() as usize).min(bins - 1)
}

pub fn ece_from_predictions(
    predictions: &[f64],
    labels: &[i8],
    bins: usize,
) -> Result<f64, MetricError> {
    check_lengths(predictions, labels)?;
    if bins == 0 {
        return Err(MetricError::ZeroBins);
    }
    let mut counts = vec![0usize; bins];
    let mut positives = vec![0usize; bins];
    let mut risk = vec![CompensatedSum::new(); bins];
    for (&p, &y) in predictions.iter().zip(labels) {
        let b = ece_bin(p, bins);
        counts[b] += 1;
        risk[b].add(p);
        if y > 0 {
            positives[b] += 1;
        }
    }
    let n = predictions.len() as f64;
    let mut total = CompensatedSum::new();
    for b in 0..bins {
        if counts[b] == 0 {
            continue;
        }
        let nb = counts[b] as f64;
        let mean_risk = risk[b].value() / nb;
        let observed = positives[b] as f64 / nb;
        total.add(nb / n * (mean_risk - observed).abs());
    }
    Ok(total.value())
}

fn check_lengths(predictions: &[f64], labels: &[i8]) -> Result<(), MetricError> {
    if predictions.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    Ok(())
}

/// Lower-is-better value `M(g)` of `metric`.
pub fn evaluate(model: &LinearModel, data: &Dataset, metric: &MetricSpec) -> Result<f64, MetricError> {
    metric.validate()?;
    match metric.kind {
        MetricKind::LogLoss => log_loss(model, data),
        MetricKind::AucError => Ok(1.0 - auc(model, data, metric.auc_ties)?),
        MetricKind::Ece => ece(model, data, metric.ece_bins),
    }
}

/// All three metric values of one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub log_loss: f64,
    pub auc_error: f64,
    pub ece: f64,
}

impl MetricValues {
    pub fn compute(
        model: &LinearModel,
        data: &Dataset,
        ece_bins: usize,
        ties: AucTies,
    ) -> Result<Self, MetricError> {
        let p = model.predictions(data)?;
        Ok(Self {
            log_loss: log_loss(model, data)?,
            auc_error: 1.0 - auc_from_predictions(&p, data.labels(), ties)?,
            ece: ece_from_predictions(&p, data.labels(), ece_bins)?,
        })
    }

    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::LogLoss => self.log_loss,
            MetricKind::AucError => self.auc_error,
            MetricKind::Ece => self.ece,
        }
    }
}
