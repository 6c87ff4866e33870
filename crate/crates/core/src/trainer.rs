//! Baseline and single-constraint ERM for L2-regularized logistic regression.
//!
//! Both problems are solved with L-BFGS. The constrained problem is solved on
//! the constraint hyperplane (the constraint is always active when the
//! unconstrained optimum violates it); if the multiplier there has the wrong
//! sign the solver falls back to an unconstrained run from a feasible point.

use std::collections::HashMap;
use std::collections::VecDeque;

use log::{debug, trace};
use serde::{Deserialize, Serialize};

use crate::dataset::{row_key, Dataset};
use crate::model::{LinearModel, ModelError};
use crate::numeric::{dot, logit, norm_inf, sigmoid, softplus};

/// Threshold probabilities are clamped into this band before taking logits.
pub const THRESHOLD_CLAMP: f64 = 1e-4;

const HISTORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const CURVATURE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("no convergence after {iterations} iterations (stationarity residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("example index {index} out of range for {n} examples")]
    ExampleOutOfRange { index: usize, n: usize },
    #[error("threshold probability {0} is outside (0, 1)")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub l2_penalty: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub constraint_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_penalty: 1e-6,
            max_iters: 50_000,
            grad_tol: 1e-8,
            constraint_tol: 1e-9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return bad("l2_penalty must be nonnegative");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.constraint_tol >= 0.0) {
            return bad("constraint_tol must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `g(x_i) <= p`
    AtMost,
    /// `g(x_i) >= p`
    AtLeast,
}

/// Probability bound on one example, held in score space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConstraint {
    pub example_index: usize,
    pub direction: Direction,
    pub threshold_probability: f64,
    pub score_bound: f64,
}

impl ScoreConstraint {
    /// Clamps `p` into `[1e-4, 1 - 1e-4]` and stores `logit(p)`.
    pub fn new(example_index: usize, direction: Direction, p: f64) -> Result<Self, TrainError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(TrainError::InvalidThreshold(p));
        }
        let p = p.clamp(THRESHOLD_CLAMP, 1.0 - THRESHOLD_CLAMP);
        Ok(Self {
            example_index,
            direction,
            threshold_probability: p,
            score_bound: logit(p),
        })
    }

    /// Signed violation: positive when `score` is on the wrong side.
    pub fn violation(&self, score: f64) -> f64 {
        match self.direction {
            Direction::AtMost => score - self.score_bound,
            Direction::AtLeast => self.score_bound - score,
        }
    }

    fn sign(&self) -> f64 {
        match self.direction {
            Direction::AtMost => 1.0,
            Direction::AtLeast => -1.0,
        }
    }
}

/// Result of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trained {
    pub model: LinearModel,
    pub iterations: usize,
    /// Infinity norm of the regularized gradient, projected onto feasible
    /// directions when a constraint is active.
    pub residual: f64,
    /// Regularized objective at the solution.
    pub objective: f64,
    pub constraint_active: bool,
}

/// Regularized loss with identical (x, y) pairs merged into weighted rows.
pub(crate) struct Objective {
    rows: Vec<f64>,
    margin_sign: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
    l2: f64,
}

impl Objective {
    pub(crate) fn new(data: &Dataset, l2: f64) -> Self {
        let dim = data.dim();
        let mut index: HashMap<(Vec<u64>, i8), usize> = HashMap::new();
        let mut rows = Vec::new();
        let mut margin_sign = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (i, x) in data.rows().enumerate() {
            let y = data.labels()[i];
            let slot = *index.entry((row_key(x), y)).or_insert_with(|| {
                rows.extend_from_slice(x);
                margin_sign.push(f64::from(y));
                weights.push(0.0);
                weights.len() - 1
            });
            weights[slot] += 1.0;
        }
        let n = data.n() as f64;
        for w in &mut weights {
            *w /= n;
        }
        Self {
            rows,
            margin_sign,
            weights,
            dim,
            l2,
        }
    }

    /// Objective value; writes the gradient into `grad`.
    fn eval(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().zip(w).for_each(|(g, wj)| *g = self.l2 * wj);
        let mut loss = 0.0;
        for ((x, &y), &weight) in self
            .rows
            .chunks_exact(self.dim)
            .zip(&self.margin_sign)
            .zip(&self.weights)
        {
            let margin = y * dot(w, x);
            loss += weight * softplus(-margin);
            let coef = -weight * y * sigmoid(-margin);
            grad.iter_mut().zip(x).for_each(|(g, xj)| *g += coef * xj);
        }
        loss + 0.5 * self.l2 * dot(w, w)
    }
}

/// Affine subspace `{w : <a, w> = b}` or the whole space.
struct Hyperplane {
    normal: Vec<f64>,
    offset: f64,
    norm_sq: f64,
}

impl Hyperplane {
    fn project_point(&self, w: &mut [f64]) {
        let t = (self.offset - dot(&self.normal, w)) / self.norm_sq;
        w.iter_mut().zip(&self.normal).for_each(|(wj, aj)| *wj += t * aj);
    }

    fn project_direction(&self, v: &mut [f64]) {
        let t = dot(&self.normal, v) / self.norm_sq;
        v.iter_mut().zip(&self.normal).for_each(|(vj, aj)| *vj -= t * aj);
    }
}

struct Run {
    w: Vec<f64>,
    f: f64,
    grad: Vec<f64>,
    iterations: usize,
    residual: f64,
}

fn projected(grad: &[f64], plane: Option<&Hyperplane>) -> Vec<f64> {
    let mut g = grad.to_vec();
    if let Some(p) = plane {
        p.project_direction(&mut g);
    }
    g
}

/// L-BFGS minimization of `obj`, restricted to `plane` when given. `w0` must
/// already lie on the plane.
fn minimize(
    obj: &Objective,
    w0: Vec<f64>,
    plane: Option<&Hyperplane>,
    config: &TrainConfig,
) -> Result<Run, TrainError> {
    let d = obj.dim;
    let mut w = w0;
    let mut grad = vec![0.0; d];
    let mut f = obj.eval(&w, &mut grad);
    let mut pg = projected(&grad, plane);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut stalled = false;

    for iter in 0..config.max_iters {
        let residual = norm_inf(&pg);
        if residual <= config.grad_tol {
            trace!("converged after {iter} iterations, residual {residual:e}");
            return Ok(Run {
                w,
                f,
                grad,
                iterations: iter,
                residual,
            });
        }

        let mut dir = two_loop(&pg, &history);
        if let Some(p) = plane {
            p.project_direction(&mut dir);
        }
        let mut slope = dot(&dir, &grad);
        if !(slope < 0.0) {
            history.clear();
            dir = pg.iter().map(|g| -g).collect();
            slope = dot(&dir, &grad);
        }
        let first = history.is_empty();
        let t0 = if first { (1.0 / norm_inf(&dir)).min(1.0) } else { 1.0 };

        let step = line_search(obj, &w, f, &dir, slope, t0);
        let Some(step) = step else {
            if stalled || first {
                debug!("line search failed at iteration {iter}, residual {residual:e}");
                return Err(TrainError::NoConvergence {
                    iterations: iter,
                    residual,
                });
            }
            // Retry once from steepest descent with fresh curvature pairs.
            stalled = true;
            history.clear();
            continue;
        };
        stalled = false;

        let mut w_new = step.w;
        if let Some(p) = plane {
            p.project_point(&mut w_new);
        }
        let mut g_new = vec![0.0; d];
        let f_new = if step.exact {
            g_new.copy_from_slice(&step.grad);
            step.f
        } else {
            obj.eval(&w_new, &mut g_new)
        };
        let pg_new = projected(&g_new, plane);
        let s: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = pg_new.iter().zip(&pg).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == HISTORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        w = w_new;
        f = f_new;
        grad = g_new;
        pg = pg_new;
    }
    let residual = norm_inf(&pg);
    Err(TrainError::NoConvergence {
        iterations: config.max_iters,
        residual,
    })
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alpha = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qj, yj)| *qj -= a * yj);
        alpha.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qj| *qj *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alpha.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qj, sj)| *qj += (a - b) * sj);
    }
    q.iter_mut().for_each(|qj| *qj = -*qj);
    q
}

struct Step {
    w: Vec<f64>,
    f: f64,
    grad: Vec<f64>,
    exact: bool,
}

struct Probe {
    t: f64,
    f: f64,
    slope: f64,
    w: Vec<f64>,
    grad: Vec<f64>,
}

/// Strong-Wolfe line search (bracketing then zoom). Near convergence, when
/// function differences drop to rounding level, the approximate Wolfe test
/// (derivative-only decrease) is accepted instead of Armijo.
fn line_search(obj: &Objective, w: &[f64], f0: f64, dir: &[f64], slope0: f64, t0: f64) -> Option<Step> {
    let d = obj.dim;
    let probe = |t: f64| {
        let wt: Vec<f64> = w.iter().zip(dir).map(|(a, b)| a + t * b).collect();
        let mut g = vec![0.0; d];
        let f = obj.eval(&wt, &mut g);
        Probe {
            t,
            f,
            slope: dot(&g, dir),
            w: wt,
            grad: g,
        }
    };
    let noise = 1e-12 * (f0.abs() + 1.0);
    let decrease_ok = |p: &Probe| {
        p.f <= f0 + ARMIJO * p.t * slope0
            || (p.f <= f0 + noise && p.slope <= (2.0 * ARMIJO - 1.0) * slope0)
    };
    let curvature_ok = |p: &Probe| p.slope.abs() <= -CURVATURE * slope0;
    let accept = |p: Probe| {
        Some(Step {
            w: p.w,
            f: p.f,
            grad: p.grad,
            exact: true,
        })
    };

    let mut prev = Probe {
        t: 0.0,
        f: f0,
        slope: slope0,
        w: w.to_vec(),
        grad: Vec::new(),
    };
    let mut t = t0;
    for i in 0..40 {
        let cur = probe(t);
        if !cur.f.is_finite() {
            t *= 0.1;
            continue;
        }
        if !decrease_ok(&cur) || (i > 0 && cur.f >= prev.f) {
            return zoom(prev, cur, &probe, &decrease_ok, &curvature_ok).and_then(accept);
        }
        if curvature_ok(&cur) {
            return accept(cur);
        }
        if cur.slope >= 0.0 {
            return zoom(cur, prev, &probe, &decrease_ok, &curvature_ok).and_then(accept);
        }
        t *= 2.0;
        prev = cur;
    }
    None
}

fn zoom(
    mut lo: Probe,
    mut hi: Probe,
    probe: &impl Fn(f64) -> Probe,
    decrease_ok: &impl Fn(&Probe) -> bool,
    curvature_ok: &impl Fn(&Probe) -> bool,
) -> Option<Probe> {
    for _ in 0..60 {
        let (a, b) = (lo.t.min(hi.t), lo.t.max(hi.t));
        if b - a <= 1e-16 * b.max(1e-300) {
            break;
        }
        let t = cubic_min(&lo, &hi).clamp(a + 0.1 * (b - a), b - 0.1 * (b - a));
        let cur = probe(t);
        if !decrease_ok(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature_ok(&cur) {
                return Some(cur);
            }
            if cur.slope * (hi.t - lo.t) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // Interval collapsed: take the best decreasing point found, if any.
    (lo.t > 0.0 && !lo.grad.is_empty()).then_some(lo)
}

/// Minimizer of the cubic interpolating values and slopes at two points;
/// falls back to bisection.
fn cubic_min(a: &Probe, b: &Probe) -> f64 {
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.t - b.t);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return 0.5 * (a.t + b.t);
    }
    let d2 = (b.t - a.t).signum() * disc.sqrt();
    let t = b.t - (b.t - a.t) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    if t.is_finite() {
        t
    } else {
        0.5 * (a.t + b.t)
    }
}

/// Unconstrained regularized ERM from the origin.
pub fn train_baseline(data: &Dataset, config: &TrainConfig) -> Result<Trained, TrainError> {
    config.validate()?;
    let obj = Objective::new(data, config.l2_penalty);
    let run = minimize(&obj, vec![0.0; data.dim()], None, config)?;
    debug!(
        "baseline: {} iterations, residual {:e}, objective {}",
        run.iterations, run.residual, run.f
    );
    Ok(Trained {
        model: LinearModel::from_vec_unchecked(run.w),
        iterations: run.iterations,
        residual: run.residual,
        objective: run.f,
        constraint_active: false,
    })
}

/// Regularized ERM subject to one probability bound on one example.
pub fn train_candidate(
    data: &Dataset,
    constraint: &ScoreConstraint,
    warm_start: Option<&LinearModel>,
    config: &TrainConfig,
) -> Result<Trained, TrainError> {
    config.validate()?;
    let i = constraint.example_index;
    if i >= data.n() {
        return Err(TrainError::ExampleOutOfRange { index: i, n: data.n() });
    }
    if let Some(ws) = warm_start {
        ws.check_dim(data.dim())?;
    }
    let obj = Objective::new(data, config.l2_penalty);
    solve_candidate(
        &obj,
        data.row(i),
        constraint,
        warm_start.map(|m| m.coefficients()),
        config,
    )
}

/// Constrained solve against a prebuilt objective; `x` is the constrained
/// example's feature row.
pub(crate) fn solve_candidate(
    obj: &Objective,
    x: &[f64],
    constraint: &ScoreConstraint,
    warm_start: Option<&[f64]>,
    config: &TrainConfig,
) -> Result<Trained, TrainError> {
    let i = constraint.example_index;
    let plane = Hyperplane {
        normal: x.to_vec(),
        offset: constraint.score_bound,
        norm_sq: dot(x, x),
    };
    let mut start = warm_start
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; obj.dim]);
    plane.project_point(&mut start);

    let run = minimize(obj, start, Some(&plane), config)?;
    // Multiplier of the constraint written as sign * <x, w> <= sign * b.
    let multiplier = -constraint.sign() * dot(&run.grad, x) / plane.norm_sq;
    if multiplier >= 0.0 {
        trace!(
            "candidate {i} p={}: binding, {} iterations, residual {:e}",
            constraint.threshold_probability,
            run.iterations,
            run.residual
        );
        return Ok(Trained {
            model: LinearModel::from_vec_unchecked(run.w),
            iterations: run.iterations,
            residual: run.residual,
            objective: run.f,
            constraint_active: true,
        });
    }

    // Optimum lies strictly inside the half-space.
    let inner = minimize(obj, run.w, None, config)?;
    let mut w = inner.w;
    let mut f = inner.f;
    let mut residual = inner.residual;
    if constraint.violation(dot(&w, x)) > config.constraint_tol {
        let mut g = vec![0.0; obj.dim];
        w = project_halfspace_raw(&w, constraint, x);
        f = obj.eval(&w, &mut g);
        residual = norm_inf(&projected(&g, Some(&plane)));
    }
    trace!(
        "candidate {i} p={}: inactive, {} iterations",
        constraint.threshold_probability,
        run.iterations + inner.iterations
    );
    Ok(Trained {
        model: LinearModel::from_vec_unchecked(w),
        iterations: run.iterations + inner.iterations,
        residual,
        objective: f,
        constraint_active: false,
    })
}

/// Euclidean projection onto the half-space described by `constraint` with
/// normal `x`.
pub fn project_halfspace(
    w: &[f64],
    constraint: &ScoreConstraint,
    x: &[f64],
) -> Result<Vec<f64>, TrainError> {
    if w.len() != x.len() {
        return Err(ModelError::DimensionMismatch {
            expected: w.len(),
            got: x.len(),
        }
        .into());
    }
    if dot(x, x) == 0.0 {
        return Err(TrainError::InvalidConfig("zero feature vector".into()));
    }
    Ok(project_halfspace_raw(w, constraint, x))
}

fn project_halfspace_raw(w: &[f64], constraint: &ScoreConstraint, x: &[f64]) -> Vec<f64> {
    let excess = constraint.violation(dot(w, x)).max(0.0);
    let step = excess / dot(x, x) * constraint.sign();
    w.iter().zip(x).map(|(wj, xj)| wj - step * xj).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{log_loss, loss_gradient};
    use proptest::prelude::*;

    fn symmetric() -> Dataset {
        let rows = [vec![1.0], vec![2.0], vec![0.5], vec![-1.0], vec![-2.0], vec![-0.5]];
        // overlapping classes so the optimum is finite
        Dataset::from_rows(&rows, vec![1, 1, -1, -1, -1, 1], vec!["x".into()], None).unwrap()
    }

    fn noisy(n: usize, seed: u64) -> Dataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = if i % 2 == 0 { 1 } else { -1 };
            let shift = f64::from(label as i32);
            rows.push(vec![shift + rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)]);
            y.push(label);
        }
        Dataset::from_rows(&rows, y, vec!["a".into(), "b".into()], None).unwrap()
    }

    fn regularized_grad(m: &LinearModel, d: &Dataset, l2: f64) -> Vec<f64> {
        let mut g = loss_gradient(m, d).unwrap();
        g.iter_mut().zip(m.coefficients()).for_each(|(gj, wj)| *gj += l2 * wj);
        g
    }

    #[test]
    fn baseline_symmetric_intercept_is_zero() {
        let d = symmetric();
        let cfg = TrainConfig::default();
        let t = train_baseline(&d, &cfg).unwrap();
        assert!(t.model.coefficients()[0].abs() < 1e-6);
        let g = regularized_grad(&t.model, &d, cfg.l2_penalty);
        assert!(norm_inf(&g) <= cfg.grad_tol * 1.01);
        assert!(log_loss(&t.model, &d).unwrap() <= std::f64::consts::LN_2);
    }

    #[test]
    fn baseline_on_separable_data_is_finite() {
        let rows = [vec![1.0], vec![2.0], vec![-1.0], vec![-2.0]];
        let d = Dataset::from_rows(&rows, vec![1, 1, -1, -1], vec!["x".into()], None).unwrap();
        let cfg = TrainConfig {
            l2_penalty: 1e-4,
            ..TrainConfig::default()
        };
        let t = train_baseline(&d, &cfg).unwrap();
        assert!(t.model.coefficients().iter().all(|c| c.is_finite()));
        assert!(norm_inf(&regularized_grad(&t.model, &d, 1e-4)) <= 1e-8);
    }

    #[test]
    fn inactive_constraint_returns_baseline() {
        let d = noisy(40, 1);
        let cfg = TrainConfig::default();
        let base = train_baseline(&d, &cfg).unwrap();
        let p0 = base.model.predict(d.row(0)).unwrap();
        let c = ScoreConstraint::new(0, Direction::AtMost, (p0 + 0.2).min(0.99)).unwrap();
        let t = train_candidate(&d, &c, None, &cfg).unwrap();
        assert!(!t.constraint_active);
        let l0 = log_loss(&base.model, &d).unwrap();
        assert!((log_loss(&t.model, &d).unwrap() - l0).abs() < 1e-9);
    }

    #[test]
    fn binding_constraint_is_tight_and_costs_loss() {
        let d = noisy(40, 2);
        let cfg = TrainConfig::default();
        let base = train_baseline(&d, &cfg).unwrap();
        let l0 = log_loss(&base.model, &d).unwrap();
        for (i, dir, shift) in [(3, Direction::AtMost, -0.3), (5, Direction::AtLeast, 0.3)] {
            let p0 = base.model.predict(d.row(i)).unwrap();
            let c = ScoreConstraint::new(i, dir, (p0 + shift).clamp(0.01, 0.99)).unwrap();
            let t = train_candidate(&d, &c, Some(&base.model), &cfg).unwrap();
            assert!(t.constraint_active);
            let s = t.model.score(d.row(i)).unwrap();
            assert!((s - c.score_bound).abs() < 1e-6);
            assert!(log_loss(&t.model, &d).unwrap() >= l0 - 1e-9);
            assert!(t.residual <= cfg.grad_tol);
        }
    }

    #[test]
    fn threshold_at_baseline_prediction_costs_nothing() {
        let d = noisy(30, 3);
        let cfg = TrainConfig::default();
        let base = train_baseline(&d, &cfg).unwrap();
        let p0 = base.model.predict(d.row(4)).unwrap();
        let c = ScoreConstraint::new(4, Direction::AtMost, p0).unwrap();
        let t = train_candidate(&d, &c, None, &cfg).unwrap();
        let l0 = log_loss(&base.model, &d).unwrap();
        assert!(log_loss(&t.model, &d).unwrap() - l0 <= 1e-9);
    }

    #[test]
    fn score_bound_is_logit() {
        let c = ScoreConstraint::new(0, Direction::AtLeast, 0.3).unwrap();
        assert!((c.score_bound - (0.3f64 / 0.7).ln()).abs() < 1e-12);
        let c = ScoreConstraint::new(0, Direction::AtLeast, 1e-7).unwrap();
        assert_eq!(c.threshold_probability, 1e-4);
        assert!(ScoreConstraint::new(0, Direction::AtLeast, 1.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let c = ScoreConstraint {
            example_index: 0,
            direction: Direction::AtMost,
            threshold_probability: sigmoid(1.0),
            score_bound: 1.0,
        };
        assert_eq!(project_halfspace(&[2.0, 0.0], &c, &[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(project_halfspace(&[0.5, 3.0], &c, &[1.0, 0.0]).unwrap(), vec![0.5, 3.0]);
        assert!(project_halfspace(&[0.5], &c, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn candidate_loss_grows_as_bound_tightens() {
        let d = noisy(40, 4);
        let cfg = TrainConfig::default();
        let base = train_baseline(&d, &cfg).unwrap();
        let p0 = base.model.predict(d.row(7)).unwrap();
        let mut last = log_loss(&base.model, &d).unwrap();
        let mut warm = base.model.clone();
        for k in 1..6 {
            let p = p0 + 0.15 * k as f64 * (1.0 - p0) / 1.0;
            let c = ScoreConstraint::new(7, Direction::AtLeast, p.min(0.99)).unwrap();
            let t = train_candidate(&d, &c, Some(&warm), &cfg).unwrap();
            let l = log_loss(&t.model, &d).unwrap();
            assert!(l >= last - 1e-9);
            last = l;
            warm = t.model;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projection_is_idempotent_and_feasible(
            w in prop::collection::vec(-5.0..5.0f64, 3),
            x in prop::collection::vec(-3.0..3.0f64, 2),
            bound in -2.0..2.0f64,
            at_most in prop::bool::ANY,
        ) {
            let x = [1.0, x[0], x[1]];
            let c = ScoreConstraint {
                example_index: 0,
                direction: if at_most { Direction::AtMost } else { Direction::AtLeast },
                threshold_probability: sigmoid(bound),
                score_bound: bound,
            };
            let once = project_halfspace(&w, &c, &x).unwrap();
            let twice = project_halfspace(&once, &c, &x).unwrap();
            prop_assert!(c.violation(dot(&once, &x)) <= 1e-12);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
