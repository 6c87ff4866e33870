use std::path::Path;

use proptest::prelude::*;

use mpaudit::audit::{run_audit, run_train, AuditConfig, DataSource, AuditReport, METRICS_SCHEMA, REPORT_SCHEMA};
use mpaudit::dataset::{generate_synthetic, SyntheticSpec};
use mpaudit::metrics::MetricKind;
use mpaudit::multiplicity::{sweep, CandidatePool};

fn validate(schema: &str, path: &Path) {
    let schema: serde_json::Value = serde_json::from_str(schema).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    let msgs: Vec<String> = match compiled.validate(&doc) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("{} fails its schema: {msgs:?}", path.display());
}

fn synthetic(spec: SyntheticSpec) -> AuditConfig {
    AuditConfig {
        data: Some(DataSource::Synthetic(spec)),
        ..AuditConfig::default()
    }
}

#[test]
fn emitted_json_validates_against_bundled_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let config = synthetic(SyntheticSpec {
        n_total: Some(60),
        ..SyntheticSpec::majority_minority(1.0, 4.0, 2)
    });
    run_audit(&config, dir.path()).unwrap();
    validate(REPORT_SCHEMA, &dir.path().join("report.json"));
    run_train(&config, &dir.path().join("train")).unwrap();
    validate(METRICS_SCHEMA, &dir.path().join("train/metrics.json"));
}

#[test]
fn group_table_at_ten_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = synthetic(SyntheticSpec::majority_minority(1.0, 10.0, 0));
    config.milp_cells.clear();
    let report = run_audit(&config, dir.path()).unwrap().report;
    let cell = &report.sweeps[0].group_breakdown[..2];
    assert_eq!((cell[0].group.as_str(), cell[0].size), ("majority", 150));
    assert_eq!((cell[1].group.as_str(), cell[1].size), ("minority", 15));
    let csv = std::fs::read_to_string(dir.path().join("groups.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("log_loss,minority,15,")));
}

#[test]
fn ambiguity_vanishes_at_delta_near_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = synthetic(SyntheticSpec::separability(10.0, 1));
    config.delta_grid = vec![0.2, 0.99];
    config.milp_cells.clear();
    let report = run_audit(&config, dir.path()).unwrap().report;
    // Only log loss punishes saturated predictions; AUC ignores the intercept
    // and ECE admits steep models that stay calibrated.
    for s in report.sweeps.iter().filter(|s| s.metric.kind == MetricKind::LogLoss) {
        for i in 0..s.epsilon_grid.len() {
            assert_eq!(s.cell(i, 1).ambiguity, 0.0, "{:?} eps {}", s.metric, s.epsilon_grid[i]);
        }
    }
}

#[test]
fn pool_archive_reproduces_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        n_total: Some(50),
        ..SyntheticSpec::outliers(2.0, 1.0, 4)
    };
    let config = synthetic(spec.clone());
    let report: AuditReport = run_audit(&config, dir.path()).unwrap().report;
    let data = generate_synthetic(&spec).unwrap();
    let pool = CandidatePool::load(dir.path().join("pool"), &data).unwrap();
    for s in &report.sweeps {
        let again = sweep(&pool, s.metric, &s.epsilon_grid, &s.delta_grid).unwrap();
        assert_eq!(&again, s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    // Exact cells never fall below the pool's lower bound on small 1-d toys.
    #[test]
    fn exact_cells_dominate_lower_bounds(seed in 0u64..1000, sigma in 1.0f64..8.0) {
        let dir = tempfile::tempdir().unwrap();
        let mut config = synthetic(SyntheticSpec {
            n_total: Some(16),
            ..SyntheticSpec::separability(sigma, seed)
        });
        config.epsilon_grid = vec![0.01, 0.05];
        config.delta_grid = vec![0.1, 0.2];
        config.milp_full_grid = true;
        config.milp.node_limit = Some(20_000);
        let report = run_audit(&config, dir.path()).unwrap().report;
        let loss = &report.sweeps[0];
        for cell in &report.exact_discrepancy {
            let i = loss.epsilon_grid.iter().position(|&e| e == cell.epsilon).unwrap();
            let j = loss.delta_grid.iter().position(|&d| d == cell.delta).unwrap();
            prop_assert!(cell.discrepancy >= loss.cell(i, j).discrepancy_lower_bound - 1e-12);
            prop_assert!(cell.discrepancy_bound >= cell.discrepancy);
            prop_assert!(cell.discrepancy <= loss.cell(i, j).ambiguity + 1e-12 || report.run.harvested > 0);
        }
    }
}
