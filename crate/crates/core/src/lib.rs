//! Predictive multiplicity audits for linear probabilistic classifiers.
//!
//! The crate trains a baseline logistic model, explores the set of
//! near-optimal competitors, and reports how far individual predictions can
//! move within that set: viable prediction ranges, ambiguity, and exact
//! discrepancy via a mixed-integer program.

pub mod audit;
pub mod dataset;
pub mod metrics;
pub mod milp;
pub mod model;
pub mod multiplicity;
pub mod numeric;
pub mod trainer;

pub use dataset::{Dataset, DatasetError};
pub use metrics::{MetricKind, MetricSpec};
pub use model::LinearModel;
