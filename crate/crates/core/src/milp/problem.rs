//! Construction of the discrepancy program: per-example score thresholds,
//! Big-M constants and loss cuts.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{row_key, Dataset};
use crate::metrics::loss_and_gradient_raw;
use crate::model::LinearModel;
use crate::multiplicity::deviates;
use crate::numeric::{dot, logit, norm_inf, sigmoid};

use super::model::{MilpModel, Row, RowSense, VarKind};
use super::MilpError;

/// Smallest half-width of the default coefficient box.
pub const MIN_COEF_BOUND: f64 = 10.0;

/// Per-coefficient box `lower <= w <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CoefBox {
    pub fn symmetric(dim: usize, bound: f64) -> Self {
        Self {
            lower: vec![-bound; dim],
            upper: vec![bound; dim],
        }
    }

    /// `[-B, B]` per coefficient with `B = max(10, 2 * max|w0|)`.
    pub fn around(baseline: &LinearModel) -> Self {
        let b = MIN_COEF_BOUND.max(2.0 * norm_inf(baseline.coefficients()));
        Self::symmetric(baseline.dim(), b)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn validate(&self, dim: usize) -> Result<(), MilpError> {
        if self.lower.len() != dim || self.upper.len() != dim {
            return Err(MilpError::InvalidBounds(format!(
                "box has {}/{} entries for {dim} coefficients",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (j, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(MilpError::InvalidBounds(format!(
                    "coefficient {j} has bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Largest score over the box, maximizing coordinatewise by sign.
    pub fn max_score(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&xj, (&lo, &hi))| if xj > 0.0 { hi * xj } else { lo * xj })
            .sum()
    }

    pub fn min_score(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&xj, (&lo, &hi))| if xj > 0.0 { lo * xj } else { hi * xj })
            .sum()
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.len() == self.dim()
            && w.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| lo <= v && v <= hi)
    }
}

/// Score-space description of "moves by at least delta" for one example.
///
/// A downward move is `score <= v_plus`, an upward move `score >= v_minus`.
/// A side whose probability target leaves (0, 1) is inactive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationThresholds {
    pub baseline_probability: f64,
    pub v_plus: f64,
    pub v_minus: f64,
    pub big_m_plus: f64,
    pub big_m_minus: f64,
    pub active_plus: bool,
    pub active_minus: bool,
}

impl DeviationThresholds {
    pub fn is_active(&self) -> bool {
        self.active_plus || self.active_minus
    }
}

/// Tangent under-estimator of the loss turned into a constraint:
/// `gradient . w <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCut {
    pub gradient: Vec<f64>,
    pub rhs: f64,
}

impl LossCut {
    /// Positive when `w` lies outside the cut.
    pub fn violation(&self, w: &[f64]) -> f64 {
        dot(&self.gradient, w) - self.rhs
    }
}

/// Everything needed to search for the model that moves the most examples.
#[derive(Debug, Clone)]
pub struct DiscrepancyProblem {
    pub baseline_loss: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub coef_box: CoefBox,
    pub baseline: LinearModel,
    /// One entry per evaluation example.
    pub thresholds: Vec<DeviationThresholds>,
    /// Cuts included in [`DiscrepancyProblem::to_model`]; seeded with the
    /// tangent at the baseline.
    pub cuts: Vec<LossCut>,
    train: Dataset,
    eval: Dataset,
}

impl DiscrepancyProblem {
    /// Problem whose deviations are counted on the training data itself.
    pub fn build(
        data: &Dataset,
        baseline: &LinearModel,
        epsilon: f64,
        delta: f64,
        coef_box: Option<CoefBox>,
    ) -> Result<Self, MilpError> {
        Self::build_with(data, data, baseline, epsilon, delta, coef_box)
    }

    /// Loss is measured on `train`, deviations counted on `eval`.
    pub fn build_with(
        train: &Dataset,
        eval: &Dataset,
        baseline: &LinearModel,
        epsilon: f64,
        delta: f64,
        coef_box: Option<CoefBox>,
    ) -> Result<Self, MilpError> {
        baseline.check_dim(train.dim())?;
        baseline.check_dim(eval.dim())?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(MilpError::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(MilpError::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
        }
        let coef_box = coef_box.unwrap_or_else(|| CoefBox::around(baseline));
        coef_box.validate(baseline.dim())?;
        let w0 = baseline.coefficients();
        if let Some(j) = (0..w0.len()).find(|&j| !(coef_box.lower[j] < w0[j] && w0[j] < coef_box.upper[j])) {
            return Err(MilpError::BaselineOutsideBox {
                index: j,
                value: w0[j],
                lower: coef_box.lower[j],
                upper: coef_box.upper[j],
            });
        }

        let mut thresholds = Vec::with_capacity(eval.n());
        for x in eval.rows() {
            let p0 = sigmoid(dot(w0, x));
            let active_plus = p0 - delta > 0.0;
            let active_minus = p0 + delta < 1.0;
            let v_plus = if active_plus { logit(p0 - delta) } else { f64::NEG_INFINITY };
            let v_minus = if active_minus { logit(p0 + delta) } else { f64::INFINITY };
            if active_plus && active_minus && v_plus >= v_minus {
                return Err(MilpError::NumericalFailure(format!(
                    "score thresholds cross ({v_plus} >= {v_minus})"
                )));
            }
            thresholds.push(DeviationThresholds {
                baseline_probability: p0,
                v_plus,
                v_minus,
                big_m_plus: if active_plus { coef_box.max_score(x) - v_plus } else { 0.0 },
                big_m_minus: if active_minus { v_minus - coef_box.min_score(x) } else { 0.0 },
                active_plus,
                active_minus,
            });
        }

        let baseline_loss = loss_and_gradient_raw(w0, train).0;
        let mut problem = Self {
            baseline_loss,
            epsilon,
            delta,
            coef_box,
            baseline: baseline.clone(),
            thresholds,
            cuts: Vec::new(),
            train: train.clone(),
            eval: eval.clone(),
        };
        let seed = problem.cut_at(w0).1;
        problem.cuts.push(seed);
        Ok(problem)
    }

    pub fn dim(&self) -> usize {
        self.baseline.dim()
    }

    pub fn n_examples(&self) -> usize {
        self.thresholds.len()
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn eval(&self) -> &Dataset {
        &self.eval
    }

    /// Upper end of the loss level set.
    pub fn loss_bound(&self) -> f64 {
        self.baseline_loss + self.epsilon
    }

    pub fn loss(&self, w: &[f64]) -> f64 {
        loss_and_gradient_raw(w, &self.train).0
    }

    /// Loss at `w` together with the tangent cut generated there.
    pub fn cut_at(&self, w: &[f64]) -> (f64, LossCut) {
        let (loss, gradient) = loss_and_gradient_raw(w, &self.train);
        let rhs = self.loss_bound() - loss + dot(&gradient, w);
        (loss, LossCut { gradient, rhs })
    }

    /// Number of evaluation examples whose prediction under `w` differs from
    /// the baseline by at least `delta`.
    pub fn deviation_count(&self, w: &[f64]) -> usize {
        self.eval
            .rows()
            .zip(&self.thresholds)
            .filter(|(x, t)| deviates((sigmoid(dot(w, x)) - t.baseline_probability).abs(), self.delta))
            .count()
    }

    /// Builds the mixed-binary program. With `aggregate`, examples with
    /// identical feature rows share one set of indicators weighted by their
    /// multiplicity.
    pub fn to_model(&self, aggregate: bool) -> (MilpModel, VarLayout) {
        let dim = self.dim();
        let mut model = MilpModel::new("DISCREP", true);
        for j in 0..dim {
            model.add_var(
                format!("W{j}"),
                self.coef_box.lower[j],
                self.coef_box.upper[j],
                VarKind::Continuous,
                0.0,
            );
        }

        let mut groups: Vec<(usize, usize)> = Vec::new();
        if aggregate {
            let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
            for (i, x) in self.eval.rows().enumerate() {
                match seen.get(&row_key(x)) {
                    Some(&g) => groups[g].1 += 1,
                    None => {
                        seen.insert(row_key(x), groups.len());
                        groups.push((i, 1));
                    }
                }
            }
        } else {
            groups = (0..self.n_examples()).map(|i| (i, 1)).collect();
        }

        let mut layout = VarLayout {
            dim,
            indicators: Vec::new(),
        };
        for (i, weight) in groups {
            let t = &self.thresholds[i];
            if !t.is_active() {
                continue;
            }
            let x = self.eval.row(i);
            let d = model.add_binary(format!("D{i}"), weight as f64);
            let plus = t.active_plus.then(|| model.add_binary(format!("ZP{i}"), 0.0));
            let minus = t.active_minus.then(|| model.add_binary(format!("ZM{i}"), 0.0));

            let mut link = vec![(d, 1.0)];
            link.extend(plus.map(|z| (z, -1.0)));
            link.extend(minus.map(|z| (z, -1.0)));
            model.add_row(Row::new(format!("L{i}"), RowSense::Eq, 0.0, link));

            let score: Vec<(usize, f64)> = x.iter().copied().enumerate().collect();
            if let Some(z) = plus {
                let mut coefs = score.clone();
                coefs.push((z, t.big_m_plus));
                model.add_row(Row::new(format!("MP{i}"), RowSense::Le, t.v_plus + t.big_m_plus, coefs));
            }
            if let Some(z) = minus {
                let mut coefs = score;
                coefs.push((z, -t.big_m_minus));
                model.add_row(Row::new(format!("MM{i}"), RowSense::Ge, t.v_minus - t.big_m_minus, coefs));
            }
            layout.indicators.push(IndicatorVars {
                example: i,
                weight,
                deviation: d,
                down: plus,
                up: minus,
            });
        }
        for (k, cut) in self.cuts.iter().enumerate() {
            model.add_row(cut_row(k, cut));
        }
        (model, layout)
    }
}

pub(crate) fn cut_row(k: usize, cut: &LossCut) -> Row {
    Row::new(
        format!("CUT{k}"),
        RowSense::Le,
        cut.rhs,
        cut.gradient.iter().copied().enumerate().collect(),
    )
}

/// Indicator columns of one (possibly aggregated) example.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorVars {
    pub example: usize,
    pub weight: usize,
    pub deviation: usize,
    pub down: Option<usize>,
    pub up: Option<usize>,
}

/// Column positions in a model produced by [`DiscrepancyProblem::to_model`].
/// Coefficients occupy columns `0..dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarLayout {
    pub dim: usize,
    pub indicators: Vec<IndicatorVars>,
}
