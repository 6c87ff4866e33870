use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{duplicate_counts, generate_synthetic, Dataset};
use crate::metrics::{auc, ece, log_loss, MetricSpec};
use crate::milp::{
    harvest_candidates, solve_discrepancy_from, to_mps_string, BnbResult, CoefBox, DiscrepancyProblem,
    SolveStatus, MIN_COEF_BOUND,
};
use crate::model::LinearModel;
use crate::multiplicity::{
    ambiguity, build_pool_with, discrepancy_lower_bound, filter_level_set, sweep, viable_ranges,
    CandidatePool, LevelSetSpec, MultiplicityReport,
};
use crate::numeric::norm_inf;
use crate::trainer::train_baseline;

use super::report::{duplicate_bucket, DUPLICATE_BUCKETS};
use super::{
    io_err, max_deviation_svg, viable_range_svg, AuditConfig, AuditError, AuditReport, BaselineSummary,
    DataSource, ExactCell, MetricsBlock, MilpCell, RangeSummary, RunMetadata, UniquenessRow,
    DEFAULT_MILP_CELL, SCHEMA_VERSION,
};

/// Files written by a command, relative paths in write order.
struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, AuditError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, AuditError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
        self.files.push(path.clone());
        Ok(path)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, AuditError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }
}

/// Comma-joined CSV line. Values never contain commas or quotes.
fn line(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

fn metrics_block(model: &LinearModel, data: &Dataset, config: &AuditConfig) -> Result<MetricsBlock, AuditError> {
    let opts = config.pool_options()?;
    let err = |e: crate::metrics::MetricError| AuditError::Config(format!("metrics: {e}"));
    Ok(MetricsBlock {
        loss: log_loss(model, data).map_err(err)?,
        auc: auc(model, data, opts.auc_ties).map_err(err)?,
        ece: ece(model, data, opts.ece_bins).map_err(err)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub model: LinearModel,
    pub feature_names: Vec<String>,
    pub iterations: usize,
    pub train: MetricsBlock,
    pub eval: Option<MetricsBlock>,
}

fn prepare(config: &AuditConfig) -> Result<(Dataset, Option<Dataset>), AuditError> {
    config.validate()?;
    config.load_data()
}

fn train_summary(config: &AuditConfig, train: &Dataset, eval: Option<&Dataset>) -> Result<TrainSummary, AuditError> {
    let trained = train_baseline(train, &config.trainer)?;
    info!("baseline trained in {} iterations", trained.iterations);
    Ok(TrainSummary {
        train: metrics_block(&trained.model, train, config)?,
        eval: eval.map(|e| metrics_block(&trained.model, e, config)).transpose()?,
        feature_names: train.feature_names().to_vec(),
        iterations: trained.iterations,
        model: trained.model,
    })
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    train: &'a MetricsBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    eval: Option<&'a MetricsBlock>,
}

/// Trains the baseline and writes `baseline.json` and `metrics.json`.
pub fn run_train(config: &AuditConfig, out_dir: &Path) -> Result<TrainSummary, AuditError> {
    let (train, eval) = prepare(config)?;
    let summary = train_summary(config, &train, eval.as_ref())?;
    let mut out = Outputs::new(out_dir)?;
    out.write("baseline.json", summary.model.to_document(&train).to_json() + "\n")?;
    out.json(
        "metrics.json",
        &MetricsFile {
            train: &summary.train,
            eval: summary.eval.as_ref(),
        },
    )?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub report: AuditReport,
    pub files: Vec<PathBuf>,
}

impl AuditOutcome {
    /// Exit code for a completed audit: 4 when limits or failures were hit.
    pub fn exit_code(&self) -> i32 {
        if self.report.partial {
            4
        } else {
            0
        }
    }
}

/// Coefficient box for an exact cell: the configured half-width, or one wide
/// enough to hold the baseline and every loss level-set member of the pool.
fn cell_box(config: &AuditConfig, pool: &CandidatePool, epsilon: f64) -> Result<CoefBox, AuditError> {
    let dim = pool.baseline().dim();
    if let Some(b) = config.milp.coef_bound {
        return Ok(CoefBox::symmetric(dim, b));
    }
    let spec = LevelSetSpec::for_pool(pool, MetricSpec::log_loss(), epsilon)?;
    let widest = filter_level_set(pool, &spec)
        .into_iter()
        .map(|m| norm_inf(pool.model(m).coefficients()))
        .fold(0.0, f64::max);
    let b = MIN_COEF_BOUND
        .max(2.0 * norm_inf(pool.baseline().coefficients()))
        .max(1.05 * widest);
    Ok(CoefBox::symmetric(dim, b))
}

fn solve_cell(
    config: &AuditConfig,
    pool: &CandidatePool,
    train: &Dataset,
    eval: &Dataset,
    cell: MilpCell,
) -> Result<(BnbResult, f64), AuditError> {
    let coef_box = cell_box(config, pool, cell.epsilon)?;
    let bound = coef_box.upper[0];
    let problem = DiscrepancyProblem::build_with(
        train,
        eval,
        pool.baseline(),
        cell.epsilon,
        cell.delta,
        Some(coef_box),
    )?;
    let spec = LevelSetSpec::for_pool(pool, MetricSpec::log_loss(), cell.epsilon)?;
    let start = discrepancy_lower_bound(pool, &spec, cell.delta)?;
    info!(
        "exact cell eps={} delta={}: box {bound}, start from pool member {}",
        cell.epsilon, cell.delta, start.model_index
    );
    let result = solve_discrepancy_from(&problem, &config.milp, Some(pool.model(start.model_index)))?;
    Ok((result, bound))
}

/// Runs a full audit and writes every report file into `out_dir`.
pub fn run_audit(config: &AuditConfig, out_dir: &Path) -> Result<AuditOutcome, AuditError> {
    let (train, eval) = prepare(config)?;
    let eval = eval.unwrap_or_else(|| train.clone());
    let summary = train_summary(config, &train, Some(&eval))?;
    let baseline = summary.model.clone();

    let mode = config.threshold_mode();
    let mut pool = build_pool_with(&train, &eval, &baseline, &mode, &config.trainer, config.pool_options()?)?;
    let initial_size = pool.len();
    if !pool.failures().is_empty() {
        warn!("{} candidate solves failed", pool.failures().len());
    }

    let cells = config.exact_cells();
    let solved: Vec<Result<(BnbResult, f64), AuditError>> = cells
        .par_iter()
        .map(|&cell| solve_cell(config, &pool, &train, &eval, cell))
        .collect();
    let solved: Vec<(BnbResult, f64)> = solved.into_iter().collect::<Result<_, _>>()?;
    if config.harvest {
        for (result, _) in &solved {
            pool = harvest_candidates(result, pool, &train, &eval)?;
        }
    }
    let harvested = pool.len() - initial_size;

    let mut exact = Vec::with_capacity(cells.len());
    for (&cell, (result, bound)) in cells.iter().zip(&solved) {
        exact.push(exact_cell(&pool, cell, result, *bound)?);
    }

    let sweeps: Vec<MultiplicityReport> = config
        .metrics
        .iter()
        .map(|&m| sweep(&pool, m, &config.epsilon_grid, &config.delta_grid))
        .collect::<Result<_, _>>()?;

    let mut out = Outputs::new(out_dir)?;
    let ranges = write_ranges(&mut out, config, &pool)?;
    let reference = cells.first().copied().unwrap_or(MilpCell {
        epsilon: DEFAULT_MILP_CELL.0,
        delta: DEFAULT_MILP_CELL.1,
    });
    let uniqueness = uniqueness_table(&pool, &eval, reference)?;

    let partial = !pool.failures().is_empty()
        || exact
            .iter()
            .any(|c| matches!(c.status, SolveStatus::TimeLimit | SolveStatus::NodeLimit));
    let report = AuditReport {
        schema_version: SCHEMA_VERSION.to_string(),
        run: RunMetadata {
            config_sha256: config.sha256(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            n_train: train.n(),
            n_eval: eval.n(),
            feature_names: train.feature_names().to_vec(),
            pool_size: pool.len(),
            harvested,
        },
        baseline: BaselineSummary {
            coefficients: baseline.coefficients().to_vec(),
            train: summary.train,
            eval: summary.eval,
        },
        sweeps,
        viable_ranges: ranges,
        exact_discrepancy: exact,
        uniqueness,
        uniqueness_cell: reference,
        candidate_failures: pool.failures().to_vec(),
        partial,
    };

    out.write("baseline.json", baseline.to_document(&train).to_json() + "\n")?;
    out.json("report.json", &report)?;
    write_tables(&mut out, &report)?;
    write_plots(&mut out, &pool, reference)?;
    pool.save(out_dir.join("pool"), train.feature_names())?;
    info!("audit written to {}", out_dir.display());
    Ok(AuditOutcome {
        report,
        files: out.files,
    })
}

/// Combines the solver result with the pool after harvesting. A level-set
/// pool member is a feasible point of the program, so the reported count is
/// never below the pool's.
fn exact_cell(pool: &CandidatePool, cell: MilpCell, result: &BnbResult, bound: f64) -> Result<ExactCell, AuditError> {
    let spec = LevelSetSpec::for_pool(pool, MetricSpec::log_loss(), cell.epsilon)?;
    let lb = discrepancy_lower_bound(pool, &spec, cell.delta)?;
    let n = result.n_examples as f64;
    let pool_count = (lb.value * n).round() as usize;
    let (deviations, coefficients) = if pool_count > result.objective {
        (pool_count, Some(pool.model(lb.model_index).coefficients().to_vec()))
    } else {
        (
            result.objective,
            result.incumbent.as_ref().map(|m| m.coefficients().to_vec()),
        )
    };
    let best_bound = result.best_bound.max(deviations as f64);
    Ok(ExactCell {
        epsilon: cell.epsilon,
        delta: cell.delta,
        status: result.status,
        deviations,
        discrepancy: deviations as f64 / n,
        discrepancy_bound: best_bound / n,
        gap: (best_bound - deviations as f64) / (deviations as f64).max(1.0),
        discrepancy_lower_bound: lb.value,
        coef_bound: bound,
        nodes: result.node_count,
        cuts: result.cut_count,
        lp_iterations: result.lp_iterations,
        coefficients,
    })
}

fn write_ranges(out: &mut Outputs, config: &AuditConfig, pool: &CandidatePool) -> Result<Vec<RangeSummary>, AuditError> {
    let mut summaries = Vec::new();
    let mut csv = String::new();
    line(&mut csv, &["metric,epsilon,example,baseline,lo,hi,width,bracketed".into()]);
    for metric in &config.metrics {
        for &epsilon in &config.epsilon_grid {
            let spec = LevelSetSpec::for_pool(pool, *metric, epsilon)?;
            let r = viable_ranges(pool, &spec);
            let widths = r.widths();
            for i in 0..widths.len() {
                line(
                    &mut csv,
                    &[
                        metric.kind.name().into(),
                        epsilon.to_string(),
                        i.to_string(),
                        r.baseline[i].to_string(),
                        r.lo[i].to_string(),
                        r.hi[i].to_string(),
                        widths[i].to_string(),
                        r.bracketed[i].to_string(),
                    ],
                );
            }
            summaries.push(RangeSummary {
                metric: metric.kind.name().into(),
                epsilon,
                estimate_kind: r.estimate_kind,
                mean_width: widths.iter().sum::<f64>() / widths.len().max(1) as f64,
                max_width: widths.iter().copied().fold(0.0, f64::max),
                n_unbracketed: r.bracketed.iter().filter(|b| !**b).count(),
            });
        }
    }
    out.write("viable_ranges.csv", csv)?;
    Ok(summaries)
}

fn uniqueness_table(pool: &CandidatePool, eval: &Dataset, cell: MilpCell) -> Result<Vec<UniquenessRow>, AuditError> {
    let spec = LevelSetSpec::for_pool(pool, MetricSpec::log_loss(), cell.epsilon)?;
    let amb = ambiguity(pool, &spec, cell.delta)?;
    let counts = duplicate_counts(eval);
    let mut rows: Vec<UniquenessRow> = DUPLICATE_BUCKETS
        .iter()
        .map(|b| UniquenessRow {
            duplicate_count: b.to_string(),
            n_examples: 0,
            n_ambiguous: 0,
            ambiguity: 0.0,
        })
        .collect();
    for (i, &c) in counts.iter().enumerate() {
        let bucket = duplicate_bucket(c);
        let row = rows.iter_mut().find(|r| r.duplicate_count == bucket).expect("known bucket");
        row.n_examples += 1;
        if crate::multiplicity::deviates(amb.per_example_max_deviation[i], cell.delta) {
            row.n_ambiguous += 1;
        }
    }
    rows.retain(|r| r.n_examples > 0);
    for r in &mut rows {
        r.ambiguity = r.n_ambiguous as f64 / r.n_examples as f64;
    }
    Ok(rows)
}

fn write_tables(out: &mut Outputs, report: &AuditReport) -> Result<(), AuditError> {
    let mut cells = String::new();
    line(&mut cells, &["metric,epsilon,delta,ambiguity,discrepancy_lower_bound,level_set_size".into()]);
    let mut groups = String::new();
    line(&mut groups, &["metric,group,size,epsilon,delta,ambiguity".into()]);
    let mut deviations = String::new();
    line(&mut deviations, &["metric,epsilon,example,max_deviation".into()]);
    for s in &report.sweeps {
        let name = s.metric.kind.name();
        for c in &s.cells {
            line(
                &mut cells,
                &[
                    name.into(),
                    c.epsilon.to_string(),
                    c.delta.to_string(),
                    c.ambiguity.to_string(),
                    c.discrepancy_lower_bound.to_string(),
                    c.level_set_size.to_string(),
                ],
            );
        }
        for g in &s.group_breakdown {
            line(
                &mut groups,
                &[
                    name.into(),
                    g.group.clone(),
                    g.size.to_string(),
                    g.epsilon.to_string(),
                    g.delta.to_string(),
                    g.ambiguity.to_string(),
                ],
            );
        }
        for (k, dev) in s.per_example_max_deviation.iter().enumerate() {
            for (i, d) in dev.iter().enumerate() {
                line(
                    &mut deviations,
                    &[name.into(), s.epsilon_grid[k].to_string(), i.to_string(), d.to_string()],
                );
            }
        }
        out.write(&format!("ambiguity_{name}.csv"), heat_table(s, |c| c.ambiguity))?;
        out.write(
            &format!("discrepancy_lower_bound_{name}.csv"),
            heat_table(s, |c| c.discrepancy_lower_bound),
        )?;
    }
    out.write("cells.csv", cells)?;
    out.write("groups.csv", groups)?;
    out.write("max_deviation.csv", deviations)?;

    let mut exact = String::new();
    line(
        &mut exact,
        &["epsilon,delta,status,deviations,discrepancy,discrepancy_bound,gap,discrepancy_lower_bound,coef_bound,nodes,cuts"
            .into()],
    );
    for c in &report.exact_discrepancy {
        let status = serde_json::to_value(c.status)?;
        line(
            &mut exact,
            &[
                c.epsilon.to_string(),
                c.delta.to_string(),
                status.as_str().unwrap_or_default().to_string(),
                c.deviations.to_string(),
                c.discrepancy.to_string(),
                c.discrepancy_bound.to_string(),
                c.gap.to_string(),
                c.discrepancy_lower_bound.to_string(),
                c.coef_bound.to_string(),
                c.nodes.to_string(),
                c.cuts.to_string(),
            ],
        );
    }
    out.write("exact_discrepancy.csv", exact)?;

    let mut uniq = String::new();
    line(&mut uniq, &["duplicate_count,n_examples,n_ambiguous,ambiguity".into()]);
    for r in &report.uniqueness {
        line(
            &mut uniq,
            &[
                r.duplicate_count.clone(),
                r.n_examples.to_string(),
                r.n_ambiguous.to_string(),
                r.ambiguity.to_string(),
            ],
        );
    }
    out.write("uniqueness.csv", uniq)?;
    Ok(())
}

/// Epsilon rows by delta columns.
fn heat_table(report: &MultiplicityReport, value: impl Fn(&crate::multiplicity::SweepCell) -> f64) -> String {
    let mut s = String::from("epsilon");
    for d in &report.delta_grid {
        let _ = write!(s, ",delta={d}");
    }
    s.push('\n');
    for (i, e) in report.epsilon_grid.iter().enumerate() {
        let _ = write!(s, "{e}");
        for j in 0..report.delta_grid.len() {
            let _ = write!(s, ",{}", value(report.cell(i, j)));
        }
        s.push('\n');
    }
    s
}

fn write_plots(out: &mut Outputs, pool: &CandidatePool, cell: MilpCell) -> Result<(), AuditError> {
    let spec = LevelSetSpec::for_pool(pool, MetricSpec::log_loss(), cell.epsilon)?;
    let r = viable_ranges(pool, &spec);
    out.write(
        "viable_ranges.svg",
        viable_range_svg(
            &r.lo,
            &r.hi,
            &r.baseline,
            &format!("Viable prediction ranges, loss epsilon = {}", cell.epsilon),
        ),
    )?;
    let amb = ambiguity(pool, &spec, cell.delta)?;
    out.write(
        "max_deviation.svg",
        max_deviation_svg(
            &amb.per_example_max_deviation,
            cell.delta,
            &format!("Maximum deviation, loss epsilon = {}", cell.epsilon),
        ),
    )?;
    Ok(())
}

/// Writes one MPS file per exact cell and returns their paths.
pub fn run_export_mps(config: &AuditConfig, out_dir: &Path) -> Result<Vec<PathBuf>, AuditError> {
    let (train, eval) = prepare(config)?;
    let eval = eval.unwrap_or_else(|| train.clone());
    let baseline = train_baseline(&train, &config.trainer)?.model;
    let mut out = Outputs::new(out_dir)?;
    for cell in config.exact_cells() {
        let coef_box = config
            .milp
            .coef_bound
            .map(|b| CoefBox::symmetric(baseline.dim(), b));
        let problem = DiscrepancyProblem::build_with(&train, &eval, &baseline, cell.epsilon, cell.delta, coef_box)?;
        let (mut model, _) = problem.to_model(config.milp.aggregate_duplicates);
        model.name = "DISCREP".into();
        out.write(
            &format!("discrepancy_eps{}_delta{}.mps", cell.epsilon, cell.delta),
            to_mps_string(&model),
        )?;
    }
    Ok(out.files)
}

/// Writes the configured synthetic dataset as CSV with a `label` column of
/// 1/-1 and, when present, a `group` column.
pub fn run_gen_synth(config: &AuditConfig, out_dir: &Path) -> Result<PathBuf, AuditError> {
    config.validate()?;
    let spec = match &config.data {
        Some(DataSource::Synthetic(spec)) => spec,
        _ => return Err(AuditError::Config("gen-synth needs a synthetic data source".into())),
    };
    let data = generate_synthetic(spec)?;
    let mut out = Outputs::new(out_dir)?;
    out.write("synthetic.csv", dataset_csv(&data))
}

/// CSV form of `data` that `load_csv` reads back with label column `label`
/// and positive label `1`.
pub fn dataset_csv(data: &Dataset) -> String {
    let names = &data.feature_names()[1..];
    let mut s = String::new();
    let mut header: Vec<String> = names.to_vec();
    if data.groups().is_some() {
        header.push("group".into());
    }
    header.push("label".into());
    line(&mut s, &header);
    for i in 0..data.n() {
        let mut fields: Vec<String> = data.row(i)[1..].iter().map(|v| v.to_string()).collect();
        if let Some(g) = data.groups() {
            fields.push(g[i].clone());
        }
        fields.push(data.labels()[i].to_string());
        line(&mut s, &fields);
    }
    s
}
