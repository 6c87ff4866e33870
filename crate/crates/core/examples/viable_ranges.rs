//! Viable prediction ranges of the loss level set on noisy synthetic data,
//! written as an SVG plot next to a short summary.

use mpaudit::audit::viable_range_svg;
use mpaudit::dataset::{generate_synthetic, SyntheticSpec};
use mpaudit::metrics::MetricSpec;
use mpaudit::multiplicity::{build_pool, viable_ranges, LevelSetSpec, ThresholdMode};
use mpaudit::trainer::{train_baseline, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = TrainConfig::default();
    let data = generate_synthetic(&SyntheticSpec::separability(10.0, 3))?;
    let baseline = train_baseline(&data, &config)?.model;
    let pool = build_pool(&data, &baseline, &ThresholdMode::default(), &config)?;

    for epsilon in [0.01, 0.05] {
        let spec = LevelSetSpec::for_pool(&pool, MetricSpec::log_loss(), epsilon)?;
        let ranges = viable_ranges(&pool, &spec);
        let widths = ranges.widths();
        let mean = widths.iter().sum::<f64>() / widths.len() as f64;
        let widest = widths.iter().copied().fold(0.0, f64::max);
        println!("epsilon {epsilon}: mean width {mean:.3}, widest {widest:.3} ({:?})", ranges.estimate_kind);
        if epsilon == 0.05 {
            let path = std::env::temp_dir().join("mpaudit_viable_ranges.svg");
            let title = format!("Viable ranges, epsilon = {epsilon}");
            std::fs::write(&path, viable_range_svg(&ranges.lo, &ranges.hi, &ranges.baseline, &title))?;
            println!("plot written to {}", path.display());
        }
    }
    Ok(())
}
