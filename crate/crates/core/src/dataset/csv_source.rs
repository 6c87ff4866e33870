use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError};

/// Where to find a CSV dataset and how to interpret its label column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub label_column: String,
    #[serde(default)]
    pub group_column: Option<String>,
    pub positive_label: String,
}

impl CsvSource {
    pub fn load(&self) -> Result<Dataset, DatasetError> {
        load_csv(
            &self.path,
            &self.label_column,
            self.group_column.as_deref(),
            &self.positive_label,
        )
    }
}

/// Reads a headed, comma-separated file. Every column other than the label
/// and group columns is parsed as a numeric feature.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    group_column: Option<&str>,
    positive_label: &str,
) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let label_idx = find(label_column)?;
    let group_idx = group_column.map(find).transpose()?;
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&j| j != label_idx && Some(j) != group_idx)
        .collect();

    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut groups = group_idx.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(feature_idx.len());
        for &j in &feature_idx {
            let cell = record.get(j).unwrap_or("").trim();
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(DatasetError::NonNumericFeature {
                        row: i,
                        column: headers[j].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        rows.push(row);
        raw_labels.push(record.get(label_idx).unwrap_or("").trim().to_string());
        if let (Some(g), Some(gi)) = (groups.as_mut(), group_idx) {
            g.push(record.get(gi).unwrap_or("").to_string());
        }
    }

    let distinct: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
    if distinct.len() != 2 {
        return Err(DatasetError::DegenerateLabels(format!(
            "label column `{label_column}` has {} distinct values {:?}, expected 2",
            distinct.len(),
            distinct
        )));
    }
    if !distinct.contains(positive_label) {
        return Err(DatasetError::DegenerateLabels(format!(
            "positive label {positive_label:?} not among {distinct:?}"
        )));
    }
    let labels = raw_labels
        .iter()
        .map(|l| if l == positive_label { 1 } else { -1 })
        .collect();
    let names = feature_idx.iter().map(|&j| headers[j].clone()).collect();
    Dataset::from_rows(&rows, labels, names, groups)
}
