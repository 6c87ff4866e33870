//! Bounded-variable dual simplex over a dense explicit basis inverse.
//!
//! Every structural variable is boxed, so placing each nonbasic variable at
//! the bound its reduced cost prefers gives a dual feasible start from the
//! all-logical basis. Bound changes keep that property, and appended rows
//! enter with their logical basic, so a solver instance can be re-solved
//! after branching or cutting without refactoring.
//!
//! Long runs of degenerate pivots switch on a small cost perturbation. The
//! perturbation stays for the solver's lifetime and is accounted for in
//! [`LpSolver::objective_bound`].

use std::time::Instant;

use log::{debug, trace};

use super::model::{MilpModel, Row, RowSense};
use super::MilpError;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFRESH_EVERY: usize = 50;
const REFACTOR_EVERY: usize = 400;
const STALL_PIVOTS: usize = 50;
const PERTURBATION: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    /// The deadline passed before the solve finished.
    Interrupted,
}

/// LP state for one model. Logical variable of row r has index
/// `n_struct + r` and satisfies `a_r x - s_r = 0`.
#[derive(Debug, Clone)]
pub struct LpSolver {
    n_struct: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    /// Minimization costs, structurals only (logicals cost 0).
    cost: Vec<f64>,
    /// Unperturbed costs.
    original_cost: Vec<f64>,
    perturbed: bool,
    lower: Vec<f64>,
    upper: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
    stale: bool,
    since_refresh: usize,
    since_refactor: usize,
    pub iterations: usize,
    pub max_iterations: usize,
    pub deadline: Option<Instant>,
}

fn row_bounds(sense: RowSense, rhs: f64) -> (f64, f64) {
    match sense {
        RowSense::Le => (f64::NEG_INFINITY, rhs),
        RowSense::Ge => (rhs, f64::INFINITY),
        RowSense::Eq => (rhs, rhs),
    }
}

impl LpSolver {
    pub fn new(model: &MilpModel) -> Result<Self, MilpError> {
        model.validate()?;
        let n = model.n_vars();
        let sign = if model.maximize { -1.0 } else { 1.0 };
        let mut s = Self {
            n_struct: n,
            m: 0,
            cols: vec![Vec::new(); n],
            cost: model.vars.iter().map(|v| sign * v.objective).collect(),
            original_cost: Vec::new(),
            perturbed: false,
            lower: model.vars.iter().map(|v| v.lower).collect(),
            upper: model.vars.iter().map(|v| v.upper).collect(),
            status: vec![Status::AtLower; n],
            basis: Vec::new(),
            binv: Vec::new(),
            x: vec![0.0; n],
            d: Vec::new(),
            stale: true,
            since_refresh: 0,
            since_refactor: 0,
            iterations: 0,
            max_iterations: usize::MAX,
            deadline: None,
        };
        s.original_cost = s.cost.clone();
        s.d = s.cost.clone();
        for j in 0..n {
            s.place_nonbasic(j);
        }
        for row in &model.rows {
            s.add_row(row);
        }
        Ok(s)
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    fn n_total(&self) -> usize {
        self.n_struct + self.m
    }

    fn place_nonbasic(&mut self, j: usize) {
        let at_upper = if self.lower[j] == f64::NEG_INFINITY {
            true
        } else if self.upper[j] == f64::INFINITY {
            false
        } else {
            self.d[j] < 0.0
        };
        if at_upper {
            self.status[j] = Status::AtUpper;
            self.x[j] = self.upper[j];
        } else {
            self.status[j] = Status::AtLower;
            self.x[j] = self.lower[j];
        }
    }

    /// Appends a row; its logical enters the basis.
    pub fn add_row(&mut self, row: &Row) {
        let m_old = self.m;
        let m = m_old + 1;
        // Basis inverse grows by one row and column:
        // [[B^-1, 0], [r_B^T B^-1, -1]].
        let mut binv = vec![0.0; m * m];
        for i in 0..m_old {
            binv[i * m..i * m + m_old].copy_from_slice(&self.binv[i * m_old..(i + 1) * m_old]);
        }
        let mut r_b = vec![0.0; m_old];
        for &(j, c) in &row.coefs {
            if self.status[j] == Status::Basic {
                let pos = self.basis.iter().position(|&b| b == j).expect("basic variable in basis");
                r_b[pos] = c;
            }
        }
        for k in 0..m_old {
            let mut acc = 0.0;
            for (i, &r) in r_b.iter().enumerate() {
                if r != 0.0 {
                    acc += r * self.binv[i * m_old + k];
                }
            }
            binv[m_old * m + k] = acc;
        }
        binv[m_old * m + m_old] = -1.0;
        self.binv = binv;
        self.m = m;

        for &(j, c) in &row.coefs {
            self.cols[j].push((m_old, c));
        }
        let (lo, hi) = row_bounds(row.sense, row.rhs);
        self.lower.push(lo);
        self.upper.push(hi);
        self.status.push(Status::Basic);
        self.d.push(0.0);
        self.x.push(row.activity(&self.x[..self.n_struct]));
        self.basis.push(self.n_struct + m_old);
    }

    /// Changes the bounds of a structural variable.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(j < self.n_struct && lower <= upper);
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.status[j] != Status::Basic {
            self.place_nonbasic(j);
            self.stale = true;
        }
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Structural values of the current basic solution.
    pub fn primal(&self) -> &[f64] {
        &self.x[..self.n_struct]
    }

    /// Objective of the current point in the model's own sense.
    pub fn objective(&self, maximize: bool) -> f64 {
        let v: f64 = self.original_cost.iter().zip(&self.x).map(|(c, x)| c * x).sum();
        if maximize {
            -v
        } else {
            v
        }
    }

    /// Bound on the unperturbed optimum after an optimal solve: an upper
    /// bound when maximizing, a lower bound when minimizing. Equals
    /// [`LpSolver::objective`] unless the costs were perturbed.
    pub fn objective_bound(&self, maximize: bool) -> f64 {
        if !self.perturbed {
            return self.objective(maximize);
        }
        let v: f64 = self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum();
        let slack: f64 = (0..self.n_struct)
            .map(|j| (self.cost[j] - self.original_cost[j]).abs() * self.lower[j].abs().max(self.upper[j].abs()))
            .sum();
        if maximize {
            -v + slack
        } else {
            v - slack
        }
    }

    pub fn is_perturbed(&self) -> bool {
        self.perturbed
    }

    /// Shifts the cost of each nonbasic structural away from zero reduced
    /// cost, in the direction that keeps its current bound optimal.
    fn perturb(&mut self) {
        self.perturbed = true;
        for j in 0..self.n_struct {
            if self.status[j] == Status::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            // Deterministic spread in [1, 2) so ties do not survive.
            let spread = 1.0 + (j as f64 * 0.618_033_988_749_895).fract();
            let xi = PERTURBATION * spread * (1.0 + self.original_cost[j].abs());
            let shift = if self.status[j] == Status::AtLower { xi } else { -xi };
            self.cost[j] += shift;
            self.d[j] += shift;
        }
        debug!("dual simplex stalled, perturbing costs");
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n_struct {
            self.cols[j].clone()
        } else {
            vec![(j - self.n_struct, -1.0)]
        }
    }

    fn recompute_primal(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.n_total() {
            if self.status[j] == Status::Basic || self.x[j] == 0.0 {
                continue;
            }
            for (r, a) in self.column(j) {
                rhs[r] -= a * self.x[j];
            }
        }
        for (p, &b) in self.basis.iter().enumerate() {
            let row = &self.binv[p * m..(p + 1) * m];
            self.x[b] = row.iter().zip(&rhs).map(|(a, r)| a * r).sum();
        }
        self.stale = false;
    }

    fn recompute_duals(&mut self) {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (p, &b) in self.basis.iter().enumerate() {
            let c = if b < self.n_struct { self.cost[b] } else { 0.0 };
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[p * m..(p + 1) * m];
            y.iter_mut().zip(row).for_each(|(yi, a)| *yi += c * a);
        }
        for j in 0..self.n_total() {
            if self.status[j] == Status::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let c = if j < self.n_struct { self.cost[j] } else { 0.0 };
            let ya: f64 = self.column(j).iter().map(|&(r, a)| y[r] * a).sum();
            self.d[j] = c - ya;
        }
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<(), MilpError> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (p, &j) in self.basis.iter().enumerate() {
            for (r, a) in self.column(j) {
                b[r * m + p] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        // Row-reduce [B | I] to [I | B^-1]; pivot rows chosen per column.
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let (mut best, mut best_val) = (k, 0.0);
            for (i, &pi) in perm.iter().enumerate().skip(k) {
                let v = b[pi * m + k].abs();
                if v > best_val {
                    best = i;
                    best_val = v;
                }
            }
            if best_val < 1e-12 {
                return Err(MilpError::NumericalFailure(format!(
                    "singular basis during refactorization (column {k})"
                )));
            }
            perm.swap(k, best);
            let pr = perm[k];
            let piv = b[pr * m + k];
            for c in 0..m {
                b[pr * m + c] /= piv;
                inv[pr * m + c] /= piv;
            }
            for &ri in perm.iter() {
                if ri == pr {
                    continue;
                }
                let f = b[ri * m + k];
                if f == 0.0 {
                    continue;
                }
                for c in k..m {
                    b[ri * m + c] -= f * b[pr * m + c];
                }
                for c in 0..m {
                    let v = inv[pr * m + c];
                    if v != 0.0 {
                        inv[ri * m + c] -= f * v;
                    }
                }
            }
        }
        // Row perm[k] of `inv` now belongs to basis position k.
        let mut out = vec![0.0; m * m];
        for k in 0..m {
            out[k * m..(k + 1) * m].copy_from_slice(&inv[perm[k] * m..(perm[k] + 1) * m]);
        }
        self.binv = out;
        self.since_refactor = 0;
        Ok(())
    }

    /// Falls back to the all-logical basis, which is dual feasible once
    /// every structural sits at the bound its cost prefers.
    fn reset_basis(&mut self) {
        let (n, m) = (self.n_struct, self.m);
        self.basis = (n..n + m).collect();
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m + i] = -1.0;
        }
        for j in n..n + m {
            self.status[j] = Status::Basic;
        }
        for j in 0..n {
            self.d[j] = self.cost[j];
            self.place_nonbasic(j);
        }
        self.since_refactor = 0;
        self.stale = true;
    }

    fn refactor_or_reset(&mut self) {
        if let Err(e) = self.refactor() {
            debug!("{e}; restarting from the logical basis");
            self.reset_basis();
        }
    }

    fn refresh(&mut self) -> Result<(), MilpError> {
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor_or_reset();
        }
        self.recompute_primal();
        self.recompute_duals();
        // Restore dual feasibility lost to drift by flipping bounds.
        for j in 0..self.n_total() {
            match self.status[j] {
                Status::AtLower if self.d[j] < -DUAL_TOL && self.upper[j].is_finite() => {
                    self.status[j] = Status::AtUpper;
                    self.x[j] = self.upper[j];
                    self.stale = true;
                }
                Status::AtUpper if self.d[j] > DUAL_TOL && self.lower[j].is_finite() => {
                    self.status[j] = Status::AtLower;
                    self.x[j] = self.lower[j];
                    self.stale = true;
                }
                _ => {}
            }
        }
        if self.stale {
            self.recompute_primal();
        }
        self.since_refresh = 0;
        Ok(())
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let x = self.x[j];
        let tol_lo = PRIMAL_TOL * self.lower[j].abs().max(1.0);
        let tol_hi = PRIMAL_TOL * self.upper[j].abs().max(1.0);
        if x < self.lower[j] - tol_lo {
            self.lower[j] - x
        } else if x > self.upper[j] + tol_hi {
            x - self.upper[j]
        } else {
            0.0
        }
    }

    /// Runs the dual simplex to optimality or proven infeasibility.
    pub fn solve(&mut self) -> Result<LpStatus, MilpError> {
        self.refresh()?;
        let start = self.iterations;
        let mut stalled = 0usize;
        loop {
            if self.deadline.is_some_and(|d| Instant::now() >= d) {
                return Ok(LpStatus::Interrupted);
            }
            if !self.perturbed && stalled >= STALL_PIVOTS {
                self.perturb();
            }
            if self.iterations - start > self.max_iterations.min(50 * (self.n_total() + 10)) {
                return Err(MilpError::NumericalFailure(format!(
                    "dual simplex exceeded {} iterations",
                    self.iterations - start
                )));
            }
            if self.since_refresh >= REFRESH_EVERY {
                self.refresh()?;
            }
            // Leaving variable: largest bound violation.
            let mut leave = None;
            let mut worst = 0.0;
            for (p, &b) in self.basis.iter().enumerate() {
                let v = self.infeasibility(b);
                if v > worst {
                    worst = v;
                    leave = Some(p);
                }
            }
            let Some(p) = leave else {
                // Confirm with fresh values before declaring optimality.
                if self.since_refresh > 0 {
                    self.refresh()?;
                    if self.basis.iter().any(|&b| self.infeasibility(b) > 0.0) {
                        continue;
                    }
                }
                trace!("lp optimal after {} iterations", self.iterations - start);
                return Ok(LpStatus::Optimal);
            };
            if (self.iterations - start).is_multiple_of(1000) {
                trace!(
                    "dual simplex: {} iterations, objective {:.9}, worst infeasibility {worst:.3e}",
                    self.iterations - start,
                    self.objective(false)
                );
            }
            let leaving = self.basis[p];
            let to_lower = self.x[leaving] < self.lower[leaving];
            let target = if to_lower {
                self.lower[leaving]
            } else {
                self.upper[leaving]
            };

            let m = self.m;
            let rho: Vec<f64> = self.binv[p * m..(p + 1) * m].to_vec();
            let mut alpha = vec![0.0; self.n_total()];
            let mut candidates = Vec::new();
            for j in 0..self.n_total() {
                let st = self.status[j];
                if st == Status::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a: f64 = if j < self.n_struct {
                    self.cols[j].iter().map(|&(r, c)| rho[r] * c).sum()
                } else {
                    -rho[j - self.n_struct]
                };
                alpha[j] = a;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let dir = if st == Status::AtLower { 1.0 } else { -1.0 };
                // x_leaving moves by -a * dir per unit step of x_j.
                let helps = if to_lower { a * dir < 0.0 } else { a * dir > 0.0 };
                if helps {
                    candidates.push(j);
                }
            }
            if candidates.is_empty() {
                return Ok(LpStatus::Infeasible);
            }
            // Harris two-pass ratio test.
            let bound = candidates
                .iter()
                .map(|&j| (self.d[j].abs() + DUAL_TOL) / alpha[j].abs())
                .fold(f64::INFINITY, f64::min);
            let mut enter = candidates[0];
            let mut best_alpha = 0.0;
            for &j in &candidates {
                let ratio = self.d[j].abs() / alpha[j].abs();
                if ratio <= bound && alpha[j].abs() > best_alpha {
                    best_alpha = alpha[j].abs();
                    enter = j;
                }
            }

            // Column of the entering variable in the current basis.
            let mut u = vec![0.0; m];
            for (r, a) in self.column(enter) {
                for (i, ui) in u.iter_mut().enumerate() {
                    *ui += self.binv[i * m + r] * a;
                }
            }
            let pivot = u[p];
            let drift = (pivot - alpha[enter]).abs() > 1e-7 * (1.0 + pivot.abs());
            if pivot.abs() <= PIVOT_TOL || (drift && self.since_refactor > 0) {
                // Row and column disagree: numerical trouble, rebuild.
                self.refactor_or_reset();
                self.refresh()?;
                continue;
            }

            let t = self.d[enter] / alpha[enter];
            if t.abs() <= 1e-12 {
                stalled += 1;
            } else {
                stalled = 0;
            }
            for j in 0..self.n_total() {
                if self.status[j] != Status::Basic && alpha[j] != 0.0 {
                    self.d[j] -= t * alpha[j];
                }
            }
            self.d[enter] = 0.0;
            self.d[leaving] = -t;

            let step = (self.x[leaving] - target) / pivot;
            for (i, &b) in self.basis.iter().enumerate() {
                if i != p {
                    self.x[b] -= step * u[i];
                }
            }
            self.x[enter] += step;
            self.x[leaving] = target;
            self.status[leaving] = if to_lower {
                Status::AtLower
            } else {
                Status::AtUpper
            };
            self.status[enter] = Status::Basic;
            self.basis[p] = enter;

            // Eta update of the explicit inverse.
            let prow: Vec<f64> = self.binv[p * m..(p + 1) * m].iter().map(|v| v / pivot).collect();
            for i in 0..m {
                if i == p || u[i] == 0.0 {
                    continue;
                }
                let f = u[i];
                let row = &mut self.binv[i * m..(i + 1) * m];
                row.iter_mut().zip(&prow).for_each(|(a, b)| *a -= f * b);
            }
            self.binv[p * m..(p + 1) * m].copy_from_slice(&prow);

            self.iterations += 1;
            self.since_refresh += 1;
            self.since_refactor += 1;
        }
    }
}

/// Optimal relaxation value and point.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

/// Solves the LP relaxation of `model` with some variables fixed.
/// Returns `None` when the relaxation is infeasible.
pub fn lp_solve(model: &MilpModel, fixings: &[(usize, f64)]) -> Result<Option<LpSolution>, MilpError> {
    let mut lp = LpSolver::new(model)?;
    for &(j, v) in fixings {
        if j >= model.n_vars() {
            return Err(MilpError::InvalidModel(format!("fixing refers to variable {j}")));
        }
        lp.set_bounds(j, v, v);
    }
    match lp.solve()? {
        LpStatus::Infeasible => Ok(None),
        LpStatus::Interrupted => Err(MilpError::NumericalFailure("solve interrupted".into())),
        LpStatus::Optimal => Ok(Some(LpSolution {
            objective: lp.objective_bound(model.maximize),
            x: lp.primal().to_vec(),
        })),
    }
}
