//! Write a discrepancy program in MPS format and read it back.

use mpaudit::dataset::{generate_synthetic, SyntheticSpec};
use mpaudit::milp::{read_mps, write_mps, DiscrepancyProblem};
use mpaudit::trainer::{train_baseline, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticSpec {
        n_total: Some(20),
        ..SyntheticSpec::separability(4.0, 1)
    };
    let data = generate_synthetic(&spec)?;
    let baseline = train_baseline(&data, &TrainConfig::default())?.model;
    let problem = DiscrepancyProblem::build(&data, &baseline, 0.05, 0.2, None)?;
    let (model, _) = problem.to_model(false);

    let path = std::env::temp_dir().join("mpaudit_discrepancy.mps");
    write_mps(&model, &path)?;
    let back = read_mps(&path)?;
    println!(
        "{}: {} variables ({} binary), {} rows",
        path.display(),
        back.n_vars(),
        back.binaries().count(),
        back.n_rows()
    );
    assert_eq!(back.n_rows(), model.n_rows());
    Ok(())
}
