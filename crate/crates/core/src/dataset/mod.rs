//! Tabular classification data: CSV ingestion, synthetic study generators and
//! duplicate analysis.
//!
//! A [`Dataset`] always carries an intercept column at index 0 and labels in
//! {-1, +1}. Values are immutable once constructed.

mod csv_source;
mod synthetic;

pub use csv_source::{load_csv, CsvSource};
pub use synthetic::{generate_synthetic, SyntheticKind, SyntheticSpec, GROUP_MAJORITY, GROUP_MINORITY};

use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const INTERCEPT_NAME: &str = "(intercept)";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric feature value {value:?} at row {row}, column `{column}`")]
    NonNumericFeature {
        row: usize,
        column: String,
        value: String,
    },
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Feature matrix with intercept column, ±1 labels and optional group labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    y: Vec<i8>,
    feature_names: Vec<String>,
    groups: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from raw feature rows (without intercept). The
    /// intercept column is prepended.
    pub fn from_rows(
        rows: &[Vec<f64>],
        labels: Vec<i8>,
        feature_names: Vec<String>,
        groups: Option<Vec<String>>,
    ) -> Result<Self, DatasetError> {
        let d = feature_names.len();
        let mut x = Vec::with_capacity(rows.len() * (d + 1));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(DatasetError::Shape(format!(
                    "row {i} has {} features, expected {d}",
                    row.len()
                )));
            }
            x.push(1.0);
            x.extend_from_slice(row);
        }
        let mut names = Vec::with_capacity(d + 1);
        names.push(INTERCEPT_NAME.to_string());
        names.extend(feature_names);
        Self::with_intercept(x, labels, names, groups)
    }

    /// Builds a dataset from a row-major matrix whose first column is the
    /// intercept.
    pub fn with_intercept(
        x: Vec<f64>,
        labels: Vec<i8>,
        feature_names: Vec<String>,
        groups: Option<Vec<String>>,
    ) -> Result<Self, DatasetError> {
        let n_cols = feature_names.len();
        let n_rows = labels.len();
        if n_cols == 0 || x.len() != n_rows * n_cols {
            return Err(DatasetError::Shape(format!(
                "{} values cannot form a {n_rows}x{n_cols} matrix",
                x.len()
            )));
        }
        if let Some(g) = &groups {
            if g.len() != n_rows {
                return Err(DatasetError::Shape(format!(
                    "{} group labels for {n_rows} rows",
                    g.len()
                )));
            }
        }
        let data = Self {
            x,
            n_rows,
            n_cols,
            y: labels,
            feature_names,
            groups,
        };
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        for i in 0..self.n_rows {
            let row = self.row(i);
            if row[0] != 1.0 {
                return Err(DatasetError::Shape(format!(
                    "row {i} has intercept value {}",
                    row[0]
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonNumericFeature {
                    row: i,
                    column: self.feature_names[j].clone(),
                    value: row[j].to_string(),
                });
            }
            if self.y[i] != 1 && self.y[i] != -1 {
                return Err(DatasetError::DegenerateLabels(format!(
                    "row {i} has label {}",
                    self.y[i]
                )));
            }
        }
        if self.n_pos() == 0 || self.n_neg() == 0 {
            return Err(DatasetError::DegenerateLabels(format!(
                "need both classes, found {} positive and {} negative",
                self.n_pos(),
                self.n_neg()
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n_rows
    }

    /// Number of coefficients, `d + 1`.
    pub fn dim(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.n_cols)
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn label(&self, i: usize) -> f64 {
        f64::from(self.y[i])
    }

    pub fn labels(&self) -> &[i8] {
        &self.y
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn n_pos(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn n_neg(&self) -> usize {
        self.y.iter().filter(|&&v| v == -1).count()
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DatasetError> {
        let mut x = Vec::with_capacity(indices.len() * self.n_cols);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        let groups = self
            .groups
            .as_ref()
            .map(|g| indices.iter().map(|&i| g[i].clone()).collect());
        Self::with_intercept(x, y, self.feature_names.clone(), groups)
    }

    /// Stacks two datasets with identical columns.
    pub fn concat(&self, other: &Self) -> Result<Self, DatasetError> {
        if self.feature_names != other.feature_names {
            return Err(DatasetError::Shape("feature names differ".into()));
        }
        let mut x = self.x.clone();
        x.extend_from_slice(&other.x);
        let mut y = self.y.clone();
        y.extend_from_slice(&other.y);
        let groups = match (&self.groups, &other.groups) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            (None, None) => None,
            _ => return Err(DatasetError::Shape("only one dataset has groups".into())),
        };
        Self::with_intercept(x, y, self.feature_names.clone(), groups)
    }

    /// Z-scores every non-intercept column. Constant columns are centred only.
    pub fn standardized(&self) -> Self {
        self.standardized_like(self)
    }

    /// Z-scores with the column means and deviations of `reference`, so an
    /// evaluation sample lands on the training scale.
    pub fn standardized_like(&self, reference: &Dataset) -> Self {
        assert_eq!(self.n_cols, reference.n_cols, "column count mismatch");
        let n = reference.n_rows as f64;
        let mut x = self.x.clone();
        for j in 1..self.n_cols {
            let mean = reference.rows().map(|r| r[j]).sum::<f64>() / n;
            let var = reference.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for i in 0..self.n_rows {
                x[i * self.n_cols + j] = (self.x[i * self.n_cols + j] - mean) / sd;
            }
        }
        Self {
            x,
            ..self.clone()
        }
    }

    /// Seeded shuffle followed by a split; the second part holds
    /// `round(test_fraction * n)` rows.
    pub fn shuffle_split(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self), DatasetError> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(DatasetError::Shape(format!(
                "test fraction {test_fraction} outside [0, 1)"
            )));
        }
        let mut idx: Vec<usize> = (0..self.n_rows).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = (test_fraction * self.n_rows as f64).round() as usize;
        let (test, train) = idx.split_at(n_test);
        Ok((self.subset(train)?, self.subset(test)?))
    }
}

/// Bit pattern of a feature row, used as an exact-equality key.
pub(crate) fn row_key(row: &[f64]) -> Vec<u64> {
    row.iter().map(|v| v.to_bits()).collect()
}

/// For each row, how many rows (itself included) have a bitwise-identical
/// feature vector.
pub fn duplicate_counts(data: &Dataset) -> Vec<usize> {
    let mut counts: HashMap<Vec<u64>, usize> = HashMap::new();
    for row in data.rows() {
        *counts.entry(row_key(row)).or_default() += 1;
    }
    data.rows().map(|row| counts[&row_key(row)]).collect()
}

/// Maps each row to the first row with the same feature vector. Returns the
/// representative index of every row.
pub fn duplicate_representatives(data: &Dataset) -> Vec<usize> {
    let mut first: HashMap<Vec<u64>, usize> = HashMap::new();
    data.rows()
        .enumerate()
        .map(|(i, row)| *first.entry(row_key(row)).or_insert(i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::from_rows(
            &[vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0, -1.0]],
            vec![1, -1, -1],
            vec!["a".into(), "b".into()],
            None,
        )
        .unwrap()
    }

    #[test]
    fn intercept_is_prepended() {
        let d = toy();
        assert_eq!(d.dim(), 3);
        assert!(d.rows().all(|r| r[0] == 1.0));
        assert_eq!(d.feature_names()[0], INTERCEPT_NAME);
        assert_eq!((d.n_pos(), d.n_neg()), (1, 2));
    }

    #[test]
    fn rejects_single_class() {
        let err = Dataset::from_rows(&[vec![1.0], vec![2.0]], vec![1, 1], vec!["a".into()], None)
            .unwrap_err();
        assert!(matches!(err, DatasetError::DegenerateLabels(_)));
    }

    #[test]
    fn rejects_non_finite_values() {
        let err = Dataset::from_rows(
            &[vec![f64::NAN], vec![2.0]],
            vec![1, -1],
            vec!["a".into()],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::NonNumericFeature { row: 0, .. }));
    }

    #[test]
    fn duplicate_counts_examples() {
        assert_eq!(duplicate_counts(&toy()), vec![2, 2, 1]);
        let distinct = Dataset::from_rows(
            &[vec![1.0], vec![2.0], vec![3.0]],
            vec![1, -1, 1],
            vec!["a".into()],
            None,
        )
        .unwrap();
        assert_eq!(duplicate_counts(&distinct), vec![1, 1, 1]);
    }

    #[test]
    fn concatenation_doubles_duplicate_counts() {
        let d = toy();
        let twice = d.concat(&d).unwrap();
        let base = duplicate_counts(&d);
        let doubled = duplicate_counts(&twice);
        for (i, c) in doubled.iter().enumerate() {
            assert_eq!(*c, 2 * base[i % d.n()]);
        }
    }

    #[test]
    fn representatives_point_to_first_copy() {
        assert_eq!(duplicate_representatives(&toy()), vec![0, 0, 2]);
    }

    #[test]
    fn shuffle_split_is_seeded() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels = (0..20).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let d = Dataset::from_rows(&rows, labels, vec!["a".into()], None).unwrap();
        let (a1, b1) = d.shuffle_split(0.3, 3).unwrap();
        let (a2, b2) = d.shuffle_split(0.3, 3).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_eq!((a1.n(), b1.n()), (14, 6));
    }

    #[test]
    fn standardized_columns_have_unit_variance() {
        let d = toy().standardized();
        let n = d.n() as f64;
        let mean: f64 = d.rows().map(|r| r[1]).sum::<f64>() / n;
        let var: f64 = d.rows().map(|r| (r[1] - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }
}
