//! Full audit of a majority/minority dataset, printing the per-group
//! ambiguity table. Report files go to a temporary directory.

use mpaudit::audit::{run_audit, AuditConfig, DataSource};
use mpaudit::dataset::SyntheticSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = AuditConfig {
        data: Some(DataSource::Synthetic(SyntheticSpec::majority_minority(1.0, 10.0, 0))),
        milp_cells: Vec::new(),
        ..AuditConfig::default()
    };
    config.milp.time_limit_secs = 30.0;
    let out = std::env::temp_dir().join("mpaudit_subgroup_audit");
    let outcome = run_audit(&config, &out)?;

    let loss = &outcome.report.sweeps[0];
    println!("{:<10} {:>5} {:>8} {:>7} {:>10}", "group", "size", "epsilon", "delta", "ambiguity");
    for g in loss.group_breakdown.iter().filter(|g| g.delta == 0.2) {
        println!("{:<10} {:>5} {:>8} {:>7} {:>10.3}", g.group, g.size, g.epsilon, g.delta, g.ambiguity);
    }
    println!("{} files in {}", outcome.files.len(), out.display());
    Ok(())
}
