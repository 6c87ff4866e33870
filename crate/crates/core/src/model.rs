//! Linear probabilistic classifier `g(x) = sigmoid(<w, x>)`.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::numeric::{dot, logit, sigmoid};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: model has {expected} coefficients, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coefficient {index} is not finite")]
    NonFinite { index: usize },
    #[error("feature names {found:?} do not match dataset columns {expected:?}")]
    FeatureNames {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("malformed model document: {0}")]
    Json(String),
}

/// Coefficient vector `[w_0, w_1, ..., w_d]`; `w_0` multiplies the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearModel {
    coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn new(coefficients: Vec<f64>) -> Result<Self, ModelError> {
        if let Some(index) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(ModelError::NonFinite { index });
        }
        Ok(Self { coefficients })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coefficients: vec![0.0; dim],
        }
    }

    pub(crate) fn from_vec_unchecked(coefficients: Vec<f64>) -> Self {
        debug_assert!(coefficients.iter().all(|c| c.is_finite()));
        Self { coefficients }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<(), ModelError> {
        if got == self.dim() {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got,
            })
        }
    }

    /// Score `<w, x>`, unclipped.
    pub fn score(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(x.len())?;
        Ok(dot(&self.coefficients, x))
    }

    /// Risk estimate `sigmoid(<w, x>)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.score(x).map(sigmoid)
    }

    pub fn scores(&self, data: &Dataset) -> Result<Vec<f64>, ModelError> {
        self.check_dim(data.dim())?;
        Ok(data.rows().map(|r| dot(&self.coefficients, r)).collect())
    }

    pub fn predictions(&self, data: &Dataset) -> Result<Vec<f64>, ModelError> {
        Ok(self.scores(data)?.into_iter().map(sigmoid).collect())
    }

    pub fn to_document(&self, data: &Dataset) -> ModelDocument {
        ModelDocument {
            feature_names: data.feature_names().to_vec(),
            coefficients: self.coefficients.clone(),
        }
    }
}

/// Score of a probability; convenience re-export for threshold conversions.
pub fn score_bound(p: f64) -> f64 {
    logit(p)
}

/// On-disk model format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
}

impl ModelDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, ModelError> {
        serde_json::from_str(json).map_err(|e| ModelError::Json(e.to_string()))
    }

    /// Validates the document against the columns of `data`.
    pub fn into_model_for(self, data: &Dataset) -> Result<LinearModel, ModelError> {
        if self.coefficients.len() != data.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: data.dim(),
                got: self.coefficients.len(),
            });
        }
        if self.feature_names != data.feature_names() {
            return Err(ModelError::FeatureNames {
                expected: data.feature_names().to_vec(),
                found: self.feature_names,
            });
        }
        LinearModel::new(self.coefficients)
    }
}
