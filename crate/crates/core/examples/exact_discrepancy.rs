//! Exact discrepancy by branch-and-bound next to the candidate-pool lower
//! bound on a small dataset.

use mpaudit::dataset::{generate_synthetic, SyntheticSpec};
use mpaudit::metrics::MetricSpec;
use mpaudit::milp::{solve_discrepancy_from, DiscrepancyProblem, MilpConfig};
use mpaudit::multiplicity::{build_pool, discrepancy_lower_bound, LevelSetSpec, ThresholdMode};
use mpaudit::trainer::{train_baseline, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (epsilon, delta) = (0.05, 0.2);
    let config = TrainConfig::default();
    let spec = SyntheticSpec {
        n_total: Some(40),
        ..SyntheticSpec::separability(10.0, 2)
    };
    let data = generate_synthetic(&spec)?;
    let baseline = train_baseline(&data, &config)?.model;

    let pool = build_pool(&data, &baseline, &ThresholdMode::aligned(delta), &config)?;
    let level_set = LevelSetSpec::for_pool(&pool, MetricSpec::log_loss(), epsilon)?;
    let lower = discrepancy_lower_bound(&pool, &level_set, delta)?;
    println!("pool lower bound: {:.3}", lower.value);

    let problem = DiscrepancyProblem::build(&data, &baseline, epsilon, delta, None)?;
    let milp = MilpConfig {
        time_limit_secs: 60.0,
        ..MilpConfig::default()
    };
    let result = solve_discrepancy_from(&problem, &milp, Some(pool.model(lower.model_index)))?;
    println!(
        "exact: {:.3} ({:?}, bound {:.3}, {} nodes, {} cuts)",
        result.discrepancy(),
        result.status,
        result.discrepancy_bound(),
        result.node_count,
        result.cut_count
    );
    if let Some(model) = &result.incumbent {
        let w = model.coefficients();
        println!("incumbent {w:?}, loss {:.6} <= {:.6}", problem.loss(w), problem.loss_bound());
    }
    Ok(())
}
