//! Ambiguity and discrepancy lower bounds over an (epsilon, delta) grid for
//! all three metrics.

use mpaudit::audit::{DEFAULT_DELTAS, DEFAULT_EPSILONS};
use mpaudit::dataset::{generate_synthetic, SyntheticSpec};
use mpaudit::metrics::{MetricKind, MetricSpec};
use mpaudit::multiplicity::{build_pool, sweep, ThresholdMode};
use mpaudit::trainer::{train_baseline, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = TrainConfig::default();
    let data = generate_synthetic(&SyntheticSpec::outliers(2.0, 1.0, 0))?;
    let baseline = train_baseline(&data, &config)?.model;
    let mode = ThresholdMode::Aligned {
        deltas: DEFAULT_DELTAS.to_vec(),
    };
    let pool = build_pool(&data, &baseline, &mode, &config)?;
    println!("pool of {} models over {} examples", pool.len(), pool.n_eval());

    for kind in MetricKind::ALL {
        let report = sweep(&pool, MetricSpec::new(kind), &DEFAULT_EPSILONS, &DEFAULT_DELTAS)?;
        println!("\n{kind} ({:?}), ambiguity / discrepancy lower bound", report.estimate_kind);
        print!("{:>8}", "eps");
        for d in &report.delta_grid {
            print!("{:>16}", format!("delta={d}"));
        }
        println!();
        for (i, e) in report.epsilon_grid.iter().enumerate() {
            print!("{e:>8}");
            for j in 0..report.delta_grid.len() {
                let c = report.cell(i, j);
                print!("{:>16}", format!("{:.3} / {:.3}", c.ambiguity, c.discrepancy_lower_bound));
            }
            println!();
        }
    }
    Ok(())
}
