//! Exact discrepancy: a mixed-binary program over coefficient vectors whose
//! objective counts examples pushed past the deviation threshold, solved by
//! branch-and-bound with tangent loss cuts.

mod bnb;
mod model;
mod mps;
mod problem;
mod simplex;

use std::path::PathBuf;

pub use bnb::{
    solve_discrepancy, solve_discrepancy_from, BnbResult, CutMode, MilpConfig, SolveStatus, INTEGRALITY_TOL,
    LOSS_TOL,
};
pub use model::{MilpModel, Row, RowSense, VarKind, Variable};
pub use mps::{parse_mps, read_mps, to_mps_string, write_mps};
pub use problem::{
    CoefBox, DeviationThresholds, DiscrepancyProblem, IndicatorVars, LossCut, VarLayout, MIN_COEF_BOUND,
};
pub use simplex::{lp_solve, LpSolution, LpSolver, LpStatus};

use crate::dataset::Dataset;
use crate::model::ModelError;
use crate::multiplicity::{CandidatePool, MultiplicityError, Provenance};

#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid coefficient bounds: {0}")]
    InvalidBounds(String),
    #[error("baseline coefficient {index} = {value} is not strictly inside [{lower}, {upper}]")]
    BaselineOutsideBox {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("{0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("MPS line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Appends the loss-feasible models found during a discrepancy search to
/// `pool`. Repeated coefficient vectors are added once.
pub fn harvest_candidates(
    result: &BnbResult,
    mut pool: CandidatePool,
    train: &Dataset,
    eval: &Dataset,
) -> Result<CandidatePool, MultiplicityError> {
    let mut added: Vec<&[f64]> = Vec::new();
    for (k, model) in result.intermediate_models.iter().enumerate() {
        let w = model.coefficients();
        if added.contains(&w) {
            continue;
        }
        added.push(w);
        pool.push(model.clone(), Provenance::Oa { iteration: k }, 0, train, eval)?;
    }
    Ok(pool)
}

#[cfg(test)]
mod tests;
