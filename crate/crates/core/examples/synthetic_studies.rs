//! The three paired synthetic studies over a few seeds. Pass a seed count as
//! the first argument (default 3).

use mpaudit::audit::{run_replicate, ReplicateOptions, Study};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: u64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(3);
    let options = ReplicateOptions {
        seeds: (0..n).collect(),
        ..ReplicateOptions::default()
    };
    let report = run_replicate(&Study::ALL, &options)?;
    for study in &report.studies {
        println!("{:?}: {}", study.study, study.claim);
        for c in &study.conditions {
            print!("  {:<14} mean ambiguity {:.3}", c.label, c.mean);
            for (g, m) in &c.group_means {
                print!(", {g} {m:.3}");
            }
            println!();
        }
        println!("  verdict: {}", if study.verdict { "holds" } else { "does not hold" });
    }
    Ok(())
}
