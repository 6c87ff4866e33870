use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use mpaudit::audit::{
    run_audit, run_export_mps, run_gen_synth, run_replicate, run_train, AuditConfig, AuditError, DataSource,
    ReplicateOptions, Study,
};
use mpaudit::dataset::{SyntheticKind, SyntheticSpec};

#[derive(Parser)]
#[command(name = "mpaudit", version, about = "Predictive multiplicity audits for logistic models")]
struct Cli {
    /// JSON audit configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed, including a synthetic data seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Evaluation sample; defaults to the training data.
    #[arg(long, global = true)]
    eval_csv: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the baseline and write it with its metrics.
    Train,
    /// Build the candidate pool, sweep the grids and solve the exact cells.
    Audit,
    /// Run the paired synthetic studies across seeds.
    Replicate {
        /// separability, outliers or ratio; all three when omitted.
        #[arg(long = "study")]
        studies: Vec<String>,
        #[arg(long, default_value_t = 10)]
        n_seeds: u64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
    },
    /// Write the discrepancy program of each exact cell as MPS.
    ExportMps,
    /// Write a synthetic dataset as CSV.
    GenSynth {
        /// separability, outliers or majority_minority; overrides the config.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, default_value_t = 4.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        outlier_margin: f64,
        #[arg(long, default_value_t = 10.0)]
        group_ratio: f64,
        #[arg(long)]
        n_total: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<AuditConfig, AuditError> {
    let mut config = match &cli.config {
        Some(path) => AuditConfig::from_path(path)?,
        None => AuditConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
        if let Some(DataSource::Synthetic(spec)) = &mut config.data {
            spec.seed = seed;
        }
    }
    if let Some(path) = &cli.eval_csv {
        config.eval_csv = Some(path.clone());
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<i32, AuditError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AuditError::Config(format!("cannot set thread count: {e}")))?;
    }
    let mut config = load_config(cli)?;
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("mpaudit-out"));

    match &cli.command {
        Command::Train => {
            let summary = run_train(&config, &out_dir)?;
            println!(
                "train: loss {:.6}, auc {:.4}, ece {:.4}",
                summary.train.loss, summary.train.auc, summary.train.ece
            );
            if let Some(e) = summary.eval {
                println!("eval:  loss {:.6}, auc {:.4}, ece {:.4}", e.loss, e.auc, e.ece);
            }
            Ok(0)
        }
        Command::Audit => {
            let outcome = run_audit(&config, &out_dir)?;
            for cell in &outcome.report.exact_discrepancy {
                println!(
                    "eps {} delta {}: discrepancy {:.4} ({:?}, bound {:.4}, pool lower bound {:.4})",
                    cell.epsilon,
                    cell.delta,
                    cell.discrepancy,
                    cell.status,
                    cell.discrepancy_bound,
                    cell.discrepancy_lower_bound
                );
            }
            println!("{} files written to {}", outcome.files.len(), out_dir.display());
            Ok(outcome.exit_code())
        }
        Command::Replicate {
            studies,
            n_seeds,
            epsilon,
            delta,
        } => {
            let studies: Vec<Study> = if studies.is_empty() {
                Study::ALL.to_vec()
            } else {
                studies.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
            };
            let options = ReplicateOptions {
                seeds: (config.seed..config.seed + n_seeds).collect(),
                epsilon: *epsilon,
                delta: *delta,
                trainer: config.trainer,
            };
            let report = run_replicate(&studies, &options)?;
            for s in &report.studies {
                let means: Vec<String> = s
                    .conditions
                    .iter()
                    .map(|c| format!("{} {:.3}", c.label, c.mean))
                    .collect();
                let verdict = if s.verdict { "pass" } else { "fail" };
                println!("{:?}: {} -> {verdict} ({})", s.study, means.join(", "), s.claim);
                if let Some(band) = s.in_band {
                    println!("{:?}: within reference band: {band}", s.study);
                }
            }
            std::fs::create_dir_all(&out_dir).map_err(|source| AuditError::Io {
                path: out_dir.clone(),
                source,
            })?;
            let path = out_dir.join("replicate.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
                .map_err(|source| AuditError::Io { path, source })?;
            Ok(0)
        }
        Command::ExportMps => {
            for path in run_export_mps(&config, &out_dir)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::GenSynth {
            kind,
            sigma,
            outlier_margin,
            group_ratio,
            n_total,
        } => {
            if let Some(kind) = kind {
                let kind: SyntheticKind = serde_json::from_value(serde_json::Value::String(kind.clone()))
                    .map_err(|_| AuditError::Config(format!("unknown synthetic kind `{kind}`")))?;
                config.data = Some(DataSource::Synthetic(SyntheticSpec {
                    kind,
                    sigma: *sigma,
                    n_total: *n_total,
                    outlier_margin: *outlier_margin,
                    group_ratio: *group_ratio,
                    seed: config.seed,
                }));
            }
            println!("{}", run_gen_synth(&config, &out_dir)?.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MPAUDIT_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
