//! Gaussian-blob generators for the separability, outlier and
//! majority-minority studies.
//!
//! All three generators work in two dimensions. Cluster geometry that the
//! studies do not pin down lives in the constants below.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError};

/// Class centres for the separability study sit at ±(c, c).
pub const SEPARABILITY_CENTER: f64 = 12.75;
/// Class centres of the base clusters in the outlier study.
pub const OUTLIER_BASE_CENTER: f64 = 10.0;
/// Offset of each outlier cluster along the decision boundary.
pub const OUTLIER_TANGENT_OFFSET: f64 = 40.0;
pub const OUTLIER_CLUSTER_SIZE: usize = 10;
pub const OUTLIER_CLUSTER_SD: f64 = 1.0;
/// Majority group: positives at (+a, 0), negatives at (-a, 0).
pub const MAJORITY_SHIFT: f64 = 2.0;
/// Minority group: positives at (-m, +b), negatives at (+m, -b).
pub const MINORITY_SHIFT: (f64, f64) = (1.0, 2.0);

pub const GROUP_MAJORITY: &str = "majority";
pub const GROUP_MINORITY: &str = "minority";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Separability,
    Outliers,
    MajorityMinority,
}

impl SyntheticKind {
    pub fn default_n_total(self) -> usize {
        match self {
            SyntheticKind::Separability => 200,
            SyntheticKind::Outliers => 320,
            SyntheticKind::MajorityMinority => 300,
        }
    }
}

fn default_ratio() -> f64 {
    1.0
}

/// Parameters of one synthetic draw. Field names double as the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    /// Cluster standard deviation.
    pub sigma: f64,
    /// Total rows; for `majority_minority` this is the combined population
    /// of both groups before the minority is subsampled.
    #[serde(default)]
    pub n_total: Option<usize>,
    /// Distance of the outlier clusters from the boundary. Outliers carry the
    /// label of the opposite side.
    #[serde(default)]
    pub outlier_margin: f64,
    /// majority:minority, e.g. 10.0 for 10:1.
    #[serde(default = "default_ratio")]
    pub group_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn separability(sigma: f64, seed: u64) -> Self {
        Self {
            kind: SyntheticKind::Separability,
            sigma,
            n_total: None,
            outlier_margin: 0.0,
            group_ratio: 1.0,
            seed,
        }
    }

    pub fn outliers(sigma: f64, outlier_margin: f64, seed: u64) -> Self {
        Self {
            kind: SyntheticKind::Outliers,
            outlier_margin,
            ..Self::separability(sigma, seed)
        }
    }

    pub fn majority_minority(sigma: f64, group_ratio: f64, seed: u64) -> Self {
        Self {
            kind: SyntheticKind::MajorityMinority,
            group_ratio,
            ..Self::separability(sigma, seed)
        }
    }

    pub fn n_total(&self) -> usize {
        self.n_total.unwrap_or(self.kind.default_n_total())
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidSpec(m));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.n_total() < 4 {
            return bad(format!("n_total must be at least 4, got {}", self.n_total()));
        }
        if !(self.group_ratio >= 1.0 && self.group_ratio.is_finite()) {
            return bad(format!("group_ratio must be >= 1, got {}", self.group_ratio));
        }
        if !self.outlier_margin.is_finite() {
            return bad("outlier_margin must be finite".into());
        }
        if self.kind == SyntheticKind::Outliers && self.n_total() < 2 * OUTLIER_CLUSTER_SIZE + 4 {
            return bad(format!(
                "outlier study needs n_total >= {}",
                2 * OUTLIER_CLUSTER_SIZE + 4
            ));
        }
        Ok(())
    }
}

struct Blobs {
    rng: ChaCha8Rng,
    rows: Vec<Vec<f64>>,
    labels: Vec<i8>,
}

impl Blobs {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            rows: Vec::new(),
            labels: Vec::new(),
        }
    }

    fn draw(&mut self, center: [f64; 2], sd: f64, count: usize) -> Vec<Vec<f64>> {
        let noise = Normal::new(0.0, sd).expect("positive standard deviation");
        (0..count)
            .map(|_| {
                vec![
                    center[0] + noise.sample(&mut self.rng),
                    center[1] + noise.sample(&mut self.rng),
                ]
            })
            .collect()
    }

    fn push(&mut self, center: [f64; 2], sd: f64, count: usize, label: i8) {
        let pts = self.draw(center, sd, count);
        self.rows.extend(pts);
        self.labels.extend(std::iter::repeat_n(label, count));
    }
}

fn names() -> Vec<String> {
    vec!["x1".into(), "x2".into()]
}

/// Draws the dataset described by `spec`. Pure in `spec`: equal specs give
/// equal datasets.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset, DatasetError> {
    spec.validate()?;
    let n = spec.n_total();
    match spec.kind {
        SyntheticKind::Separability => {
            let c = SEPARABILITY_CENTER;
            let mut b = Blobs::new(spec.seed);
            b.push([c, c], spec.sigma, n / 2, 1);
            b.push([-c, -c], spec.sigma, n - n / 2, -1);
            Dataset::from_rows(&b.rows, b.labels, names(), None)
        }
        SyntheticKind::Outliers => {
            let c = OUTLIER_BASE_CENTER;
            let base = n - 2 * OUTLIER_CLUSTER_SIZE;
            let mut b = Blobs::new(spec.seed);
            b.push([c, c], spec.sigma, base / 2, 1);
            b.push([-c, -c], spec.sigma, base - base / 2, -1);
            // Outliers sit on the wrong side of the boundary x1 + x2 = 0, at
            // distance `outlier_margin` from it, shifted along the boundary.
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let (m, t) = (spec.outlier_margin, OUTLIER_TANGENT_OFFSET);
            let pos = [-m * s + t * s, -m * s - t * s];
            b.push(pos, OUTLIER_CLUSTER_SD, OUTLIER_CLUSTER_SIZE, 1);
            b.push([-pos[0], -pos[1]], OUTLIER_CLUSTER_SD, OUTLIER_CLUSTER_SIZE, -1);
            Dataset::from_rows(&b.rows, b.labels, names(), None)
        }
        SyntheticKind::MajorityMinority => majority_minority(spec),
    }
}

fn majority_minority(spec: &SyntheticSpec) -> Result<Dataset, DatasetError> {
    let population = spec.n_total() / 2;
    let half = population / 2;
    let mut b = Blobs::new(spec.seed);

    let a = MAJORITY_SHIFT;
    b.push([a, 0.0], spec.sigma, half, 1);
    b.push([-a, 0.0], spec.sigma, population - half, -1);
    let mut groups = vec![GROUP_MAJORITY.to_string(); population];

    let (m, s) = MINORITY_SHIFT;
    let pos = b.draw([-m, s], spec.sigma, half);
    let neg = b.draw([m, -s], spec.sigma, population - half);

    let keep = ((population as f64) / spec.group_ratio).round().max(2.0) as usize;
    let keep = keep.min(population);
    let keep_pos = keep.div_ceil(2).min(pos.len());
    let keep_neg = (keep - keep_pos).min(neg.len());
    let mut pos_idx: Vec<usize> = (0..pos.len()).collect();
    let mut neg_idx: Vec<usize> = (0..neg.len()).collect();
    pos_idx.shuffle(&mut b.rng);
    neg_idx.shuffle(&mut b.rng);
    pos_idx.truncate(keep_pos);
    neg_idx.truncate(keep_neg);
    pos_idx.sort_unstable();
    neg_idx.sort_unstable();
    for &i in &pos_idx {
        b.rows.push(pos[i].clone());
        b.labels.push(1);
    }
    for &i in &neg_idx {
        b.rows.push(neg[i].clone());
        b.labels.push(-1);
    }
    groups.extend(std::iter::repeat_n(GROUP_MINORITY.to_string(), keep_pos + keep_neg));
    Dataset::from_rows(&b.rows, b.labels, names(), Some(groups))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_spec_same_data() {
        let spec = SyntheticSpec::separability(4.0, 7);
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        assert_eq!(a.n(), 200);
        assert_ne!(a, generate_synthetic(&SyntheticSpec::separability(4.0, 8)).unwrap());
    }

    #[test]
    fn outlier_study_has_exact_size() {
        let d = generate_synthetic(&SyntheticSpec::outliers(4.0, 5.0, 1)).unwrap();
        assert_eq!(d.n(), 320);
        assert_eq!(d.n_pos(), 160);
    }

    #[test]
    fn ratio_ten_to_one_keeps_fifteen_minority_rows() {
        let d = generate_synthetic(&SyntheticSpec::majority_minority(1.0, 10.0, 3)).unwrap();
        let groups = d.groups().unwrap();
        let major = groups.iter().filter(|g| *g == GROUP_MAJORITY).count();
        let minor = groups.iter().filter(|g| *g == GROUP_MINORITY).count();
        assert_eq!((major, minor), (150, 15));
        assert_eq!(d.n(), 165);
    }

    #[test]
    fn minority_count_follows_ratio() {
        for ratio in [1.0, 2.0, 3.0, 7.5, 10.0, 50.0] {
            let d = generate_synthetic(&SyntheticSpec::majority_minority(1.0, ratio, 0)).unwrap();
            let minor = d.groups().unwrap().iter().filter(|g| *g == GROUP_MINORITY).count();
            assert_eq!(minor, (150.0 / ratio).round().max(2.0) as usize);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = SyntheticSpec::separability(0.0, 0);
        assert!(generate_synthetic(&s).is_err());
        s.sigma = 1.0;
        s.n_total = Some(3);
        assert!(generate_synthetic(&s).is_err());
        let r = SyntheticSpec::majority_minority(1.0, 0.5, 0);
        assert!(generate_synthetic(&r).is_err());
    }

    #[test]
    fn spec_json_uses_field_names() {
        let json = r#"{"kind":"outliers","sigma":4.0,"outlier_margin":2.5,"seed":9}"#;
        let spec: SyntheticSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, SyntheticSpec::outliers(4.0, 2.5, 9));
    }
}
