//! Train the unconstrained baseline on a synthetic dataset and print its
//! metrics.

use mpaudit::dataset::{generate_synthetic, SyntheticSpec};
use mpaudit::metrics::{auc, ece, log_loss, AucTies, DEFAULT_ECE_BINS};
use mpaudit::trainer::{train_baseline, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_synthetic(&SyntheticSpec::separability(4.0, 0))?;
    let trained = train_baseline(&data, &TrainConfig::default())?;
    let model = &trained.model;
    println!("coefficients: {:?}", model.coefficients());
    println!("iterations:   {}", trained.iterations);
    println!("log loss:     {:.6}", log_loss(model, &data)?);
    println!("auc:          {:.4}", auc(model, &data, AucTies::Strict)?);
    println!("ece:          {:.4}", ece(model, &data, DEFAULT_ECE_BINS)?);
    Ok(())
}
