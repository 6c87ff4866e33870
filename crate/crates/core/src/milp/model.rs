use serde::{Deserialize, Serialize};

use super::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub sense: RowSense,
    pub rhs: f64,
    /// (variable index, coefficient), sorted by index, no zeros.
    pub coefs: Vec<(usize, f64)>,
}

impl Row {
    pub fn new(name: impl Into<String>, sense: RowSense, rhs: f64, mut coefs: Vec<(usize, f64)>) -> Self {
        coefs.retain(|&(_, c)| c != 0.0);
        coefs.sort_by_key(|&(j, _)| j);
        Self {
            name: name.into(),
            sense,
            rhs,
            coefs,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            RowSense::Le => (a - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - a).max(0.0),
            RowSense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// A mixed-binary linear program with boxed variables.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    pub maximize: bool,
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>, maximize: bool) -> Self {
        Self {
            name: name.into(),
            maximize,
            ..Self::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind, objective: f64) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
            objective,
        });
        self.vars.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> usize {
        self.add_var(name, 0.0, 1.0, VarKind::Binary, objective)
    }

    pub fn add_row(&mut self, row: Row) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| j)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xj)| v.objective * xj).sum()
    }

    /// Checks bounds are finite and ordered and coefficients finite.
    pub fn validate(&self) -> Result<(), MilpError> {
        for v in &self.vars {
            if !(v.lower.is_finite() && v.upper.is_finite() && v.lower <= v.upper) {
                return Err(MilpError::InvalidModel(format!(
                    "variable {} needs finite bounds with lower <= upper, got [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if !v.objective.is_finite() {
                return Err(MilpError::InvalidModel(format!("objective of {} is not finite", v.name)));
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() || r.coefs.iter().any(|&(j, c)| j >= self.vars.len() || !c.is_finite()) {
                return Err(MilpError::InvalidModel(format!("row {} has invalid data", r.name)));
            }
        }
        Ok(())
    }
}
