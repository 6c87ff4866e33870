//! On-disk pool format: `pool.json` holds provenance and cached metrics,
//! `coefficients.bin` holds one little-endian f64 row per model.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{duplicate_representatives, Dataset};
use crate::model::LinearModel;

use super::pool::{CandidateFailure, CandidatePool, PoolMember, PoolOptions, ThresholdMode};
use super::MultiplicityError;

pub const POOL_INDEX: &str = "pool.json";
pub const POOL_COEFFICIENTS: &str = "coefficients.bin";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolIndex {
    format_version: u32,
    feature_names: Vec<String>,
    n_models: usize,
    options: PoolOptions,
    mode: ThresholdMode,
    members: Vec<PoolMember>,
    failures: Vec<CandidateFailure>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MultiplicityError + '_ {
    move |source| MultiplicityError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl CandidatePool {
    /// Writes the pool archive into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>, feature_names: &[String]) -> Result<(), MultiplicityError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let index = PoolIndex {
            format_version: FORMAT_VERSION,
            feature_names: feature_names.to_vec(),
            n_models: self.len(),
            options: self.options,
            mode: self.mode.clone(),
            members: self.members.clone(),
            failures: self.failures.clone(),
        };
        let json = serde_json::to_string_pretty(&index)?;
        let path = dir.join(POOL_INDEX);
        fs::write(&path, json).map_err(io_err(&path))?;

        let mut bytes = Vec::with_capacity(self.len() * feature_names.len() * 8);
        for m in &self.models {
            for c in m.coefficients() {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
        }
        let path = dir.join(POOL_COEFFICIENTS);
        fs::write(&path, bytes).map_err(io_err(&path))
    }

    /// Reads an archive and recomputes predictions on `eval`.
    pub fn load(dir: impl AsRef<Path>, eval: &Dataset) -> Result<Self, MultiplicityError> {
        let dir = dir.as_ref();
        let path = dir.join(POOL_INDEX);
        let json = fs::read_to_string(&path).map_err(io_err(&path))?;
        let index: PoolIndex = serde_json::from_str(&json)?;
        if index.format_version != FORMAT_VERSION {
            return Err(MultiplicityError::Archive(format!(
                "unsupported pool format version {}",
                index.format_version
            )));
        }
        if index.feature_names != eval.feature_names() {
            return Err(MultiplicityError::Archive(
                "pool columns do not match the evaluation data".into(),
            ));
        }
        let path = dir.join(POOL_COEFFICIENTS);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let dim = index.feature_names.len();
        if bytes.len() != index.n_models * dim * 8 || index.members.len() != index.n_models {
            return Err(MultiplicityError::Archive(format!(
                "expected {} models of dimension {dim}, found {} bytes and {} members",
                index.n_models,
                bytes.len(),
                index.members.len()
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let models = values
            .chunks_exact(dim.max(1))
            .map(|row| LinearModel::new(row.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        let predictions = models
            .iter()
            .map(|m| m.predictions(eval))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            models,
            members: index.members,
            predictions,
            options: index.options,
            mode: index.mode,
            failures: index.failures,
            eval_groups: eval.groups().map(<[String]>::to_vec),
            representatives: duplicate_representatives(eval),
        })
    }
}
