//! Branch-and-bound over the deviation indicators with outer-approximation
//! loss cuts added at integer points that leave the level set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::model::LinearModel;

use super::problem::{cut_row, DiscrepancyProblem, LossCut, VarLayout};
use super::simplex::{LpSolver, LpStatus};
use super::MilpError;

pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const LOSS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutMode {
    /// Cut only at integer points that violate the loss bound.
    #[default]
    Integer,
    /// Also cut at every relaxation optimum that violates the loss bound.
    Relaxation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MilpConfig {
    pub mip_gap: f64,
    pub time_limit_secs: f64,
    pub node_limit: Option<usize>,
    /// Half-width of the coefficient box; `None` picks `max(10, 2 max|w0|)`.
    pub coef_bound: Option<f64>,
    pub cut_mode: CutMode,
    /// Share indicators between examples with identical features.
    pub aggregate_duplicates: bool,
}

impl Default for MilpConfig {
    fn default() -> Self {
        Self {
            mip_gap: 0.0,
            time_limit_secs: 600.0,
            node_limit: None,
            coef_bound: None,
            cut_mode: CutMode::Integer,
            aggregate_duplicates: true,
        }
    }
}

impl MilpConfig {
    pub fn validate(&self) -> Result<(), MilpError> {
        if !(self.mip_gap >= 0.0 && self.mip_gap.is_finite()) {
            return Err(MilpError::InvalidInput(format!("mip_gap must be >= 0, got {}", self.mip_gap)));
        }
        if !(self.time_limit_secs > 0.0) {
            return Err(MilpError::InvalidInput(format!(
                "time_limit_secs must be positive, got {}",
                self.time_limit_secs
            )));
        }
        if let Some(b) = self.coef_bound {
            if !(b > 0.0 && b.is_finite()) {
                return Err(MilpError::InvalidBounds(format!("coef_bound must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
    InfeasibleLevelSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnbResult {
    pub status: SolveStatus,
    pub incumbent: Option<LinearModel>,
    /// Number of evaluation examples the incumbent moves by at least delta.
    pub objective: usize,
    pub best_bound: f64,
    pub gap: f64,
    pub node_count: usize,
    pub cut_count: usize,
    pub lp_iterations: usize,
    /// Loss-feasible integer solutions in the order they were found.
    pub intermediate_models: Vec<LinearModel>,
    /// All cuts, the baseline tangent first.
    pub cuts: Vec<LossCut>,
    pub n_examples: usize,
    pub wall_time_secs: f64,
}

impl BnbResult {
    /// Fraction of evaluation examples moved by the incumbent.
    pub fn discrepancy(&self) -> f64 {
        self.objective as f64 / self.n_examples as f64
    }

    /// Upper bound on the discrepancy.
    pub fn discrepancy_bound(&self) -> f64 {
        self.best_bound / self.n_examples as f64
    }
}

#[derive(Debug, Clone)]
struct Node {
    bound: f64,
    depth: usize,
    id: usize,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap: higher bound first, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

fn fractionality(v: f64) -> f64 {
    (v - v.round()).abs()
}

fn branching_variable(layout: &VarLayout, x: &[f64]) -> Option<usize> {
    let pick = |vars: &mut dyn Iterator<Item = usize>| {
        let mut best: Option<(usize, f64)> = None;
        for j in vars {
            let f = fractionality(x[j]);
            if f > INTEGRALITY_TOL && best.is_none_or(|(_, b)| f > b) {
                best = Some((j, f));
            }
        }
        best.map(|(j, _)| j)
    };
    pick(&mut layout.indicators.iter().map(|v| v.deviation)).or_else(|| {
        pick(
            &mut layout
                .indicators
                .iter()
                .flat_map(|v| v.down.into_iter().chain(v.up)),
        )
    })
}

struct Search<'a> {
    problem: &'a DiscrepancyProblem,
    config: &'a MilpConfig,
    lp: LpSolver,
    cuts: Vec<LossCut>,
    best: usize,
    incumbent: Option<LinearModel>,
    intermediate: Vec<LinearModel>,
}

impl Search<'_> {
    fn add_cut(&mut self, cut: LossCut) {
        let row = cut_row(self.cuts.len(), &cut);
        self.lp.add_row(&row);
        self.cuts.push(cut);
    }

    fn prunable(&self, bound: f64) -> bool {
        let best = self.best as f64;
        bound <= best || (bound - best) / best.max(1.0) <= self.config.mip_gap
    }

    fn offer(&mut self, w: &[f64]) {
        let model = LinearModel::from_vec_unchecked(w.to_vec());
        let count = self.problem.deviation_count(w);
        if count > self.best {
            debug!("new incumbent: {count} deviations");
            self.best = count;
            self.incumbent = Some(model.clone());
        }
        self.intermediate.push(model);
    }
}

/// Finds the level-set model that moves the most evaluation examples by at
/// least delta.
pub fn solve_discrepancy(problem: &DiscrepancyProblem, config: &MilpConfig) -> Result<BnbResult, MilpError> {
    solve_discrepancy_from(problem, config, None)
}

/// As [`solve_discrepancy`], seeding the incumbent with `start` when it lies
/// in the box and the level set.
pub fn solve_discrepancy_from(
    problem: &DiscrepancyProblem,
    config: &MilpConfig,
    start: Option<&LinearModel>,
) -> Result<BnbResult, MilpError> {
    config.validate()?;
    let clock = Instant::now();
    let deadline = Duration::from_secs_f64(config.time_limit_secs.min(1e9));
    let (model, layout) = problem.to_model(config.aggregate_duplicates);
    let dim = problem.dim();
    let binaries: Vec<usize> = model.binaries().collect();
    let total_weight: f64 = layout.indicators.iter().map(|v| v.weight as f64).sum();

    let mut lp = LpSolver::new(&model)?;
    lp.deadline = clock.checked_add(deadline);
    let mut search = Search {
        problem,
        config,
        lp,
        cuts: problem.cuts.clone(),
        best: 0,
        incumbent: Some(problem.baseline.clone()),
        intermediate: Vec::new(),
    };
    if let Some(start) = start {
        let w = start.coefficients();
        if start.dim() == dim && problem.coef_box.contains(w) && problem.loss(w) <= problem.loss_bound() + LOSS_TOL {
            let count = problem.deviation_count(w);
            search.best = count;
            search.incumbent = Some(start.clone());
            info!("warm start with {count} deviations");
        }
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: total_weight,
        depth: 0,
        id: 0,
        fixings: Vec::new(),
    });
    let mut next_id = 1;
    let mut nodes = 0usize;
    let mut status = SolveStatus::Optimal;
    let mut root_infeasible = false;

    while let Some(node) = heap.peek() {
        if search.prunable(node.bound) {
            heap.clear();
            break;
        }
        if clock.elapsed() >= deadline {
            status = SolveStatus::TimeLimit;
            break;
        }
        if config.node_limit.is_some_and(|limit| nodes >= limit) {
            status = SolveStatus::NodeLimit;
            break;
        }
        let node = heap.pop().expect("peeked node");
        nodes += 1;

        for &j in &binaries {
            search.lp.set_bounds(j, 0.0, 1.0);
        }
        for &(j, v) in &node.fixings {
            search.lp.set_bounds(j, v, v);
        }

        let mut interrupted = false;
        loop {
            match search.lp.solve()? {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => {
                    if node.id == 0 {
                        root_infeasible = true;
                    }
                    break;
                }
                LpStatus::Interrupted => {
                    interrupted = true;
                    break;
                }
            }
            let bound = (search.lp.objective_bound(true) + INTEGRALITY_TOL).floor().min(node.bound);
            if search.prunable(bound) {
                break;
            }
            let x = search.lp.primal().to_vec();
            let w = &x[..dim];
            let branch = branching_variable(&layout, &x);
            if let (Some(j), CutMode::Integer) = (branch, config.cut_mode) {
                for v in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    heap.push(Node {
                        bound,
                        depth: node.depth + 1,
                        id: next_id,
                        fixings,
                    });
                    next_id += 1;
                }
                break;
            }
            let (loss, cut) = problem.cut_at(w);
            if loss > problem.loss_bound() + LOSS_TOL {
                debug!(
                    "node {}: loss {loss:.12} exceeds bound by {:.3e}, adding cut {}",
                    node.id,
                    loss - problem.loss_bound(),
                    search.cuts.len()
                );
                search.add_cut(cut);
                continue;
            }
            match branch {
                None => search.offer(w),
                Some(j) => {
                    for v in [0.0, 1.0] {
                        let mut fixings = node.fixings.clone();
                        fixings.push((j, v));
                        heap.push(Node {
                            bound,
                            depth: node.depth + 1,
                            id: next_id,
                            fixings,
                        });
                        next_id += 1;
                    }
                }
            }
            break;
        }
        if interrupted {
            // Re-queue so the node's bound survives in the report.
            heap.push(node);
            status = SolveStatus::TimeLimit;
            break;
        }
        if nodes.is_multiple_of(100) {
            debug!(
                "nodes {nodes}, open {}, incumbent {}, cuts {}",
                heap.len(),
                search.best,
                search.cuts.len()
            );
        }
    }

    if root_infeasible {
        status = SolveStatus::InfeasibleLevelSet;
    }
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
    let objective = search.best;
    let best_bound = if status == SolveStatus::Optimal || status == SolveStatus::InfeasibleLevelSet {
        objective as f64
    } else {
        open_bound.max(objective as f64)
    };
    let gap = (best_bound - objective as f64) / (objective as f64).max(1.0);
    info!(
        "discrepancy search {status:?}: {objective} deviations, bound {best_bound}, {nodes} nodes, {} cuts",
        search.cuts.len()
    );
    Ok(BnbResult {
        status,
        incumbent: search.incumbent,
        objective,
        best_bound,
        gap,
        node_count: nodes,
        cut_count: search.cuts.len(),
        lp_iterations: search.lp.iterations,
        intermediate_models: search.intermediate,
        cuts: search.cuts,
        n_examples: problem.n_examples(),
        wall_time_secs: clock.elapsed().as_secs_f64(),
    })
}
