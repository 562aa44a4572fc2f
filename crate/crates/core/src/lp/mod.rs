//! Linear programming.
//!
//! Programs are stated as
//!
//! ```text
//! minimize    c'x
//! subject to  A_eq x  = b_eq
//!             A_le x <= b_le
//!             x_j >= 0 or x_j free
//! ```
//!
//! and solved exactly (to a vertex) by a bounded-variable revised simplex.
//! Programs with many more constraints than variables, like the pinball
//! regressions built by [`crate::qreg`], are solved through their dual, where
//! a doubleton presolve turns the pairs of rows that define each auxiliary
//! loss variable into simple bounds. The optimal primal point is recovered
//! from the dual multipliers.

mod dual;
mod simplex;
mod standard;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use simplex::PricingRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarDomain {
    NonNegative,
    Free,
}

/// One constraint row in sparse form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.iter().map(|(j, a)| a * x[j]).sum()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    domains: Vec<VarDomain>,
    eq_rows: Vec<SparseRow>,
    eq_rhs: Vec<f64>,
    le_rows: Vec<SparseRow>,
    le_rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, domains: Vec<VarDomain>) -> Result<Self> {
        if objective.len() != domains.len() {
            return Err(Error::invalid(
                "linear program",
                format!(
                    "{} objective coefficients for {} variables",
                    objective.len(),
                    domains.len()
                ),
            ));
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("linear program", "non-finite objective coefficient"));
        }
        Ok(LinearProgram {
            objective,
            domains,
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
        })
    }

    /// All variables non-negative.
    pub fn nonnegative(objective: Vec<f64>) -> Result<Self> {
        let n = objective.len();
        Self::new(objective, vec![VarDomain::NonNegative; n])
    }

    /// Dense constructor: `a_eq`/`a_le` are lists of rows.
    pub fn from_dense(
        objective: Vec<f64>,
        domains: Vec<VarDomain>,
        a_eq: &[Vec<f64>],
        b_eq: &[f64],
        a_le: &[Vec<f64>],
        b_le: &[f64],
    ) -> Result<Self> {
        if a_eq.len() != b_eq.len() || a_le.len() != b_le.len() {
            return Err(Error::invalid(
                "linear program",
                "row count and right-hand side length differ",
            ));
        }
        let mut lp = Self::new(objective, domains)?;
        for (row, &rhs) in a_eq.iter().zip(b_eq) {
            lp.add_eq(dense_terms(row, lp.n_vars())?, rhs)?;
        }
        for (row, &rhs) in a_le.iter().zip(b_le) {
            lp.add_le(dense_terms(row, lp.n_vars())?, rhs)?;
        }
        Ok(lp)
    }

    /// Adds `sum a_j x_j = rhs`. Repeated indices are summed; zeros dropped.
    pub fn add_eq(&mut self, terms: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> Result<()> {
        let row = self.make_row(terms, rhs)?;
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        Ok(())
    }

    /// Adds `sum a_j x_j <= rhs`.
    pub fn add_le(&mut self, terms: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> Result<()> {
        let row = self.make_row(terms, rhs)?;
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
        Ok(())
    }

    fn make_row(&self, terms: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> Result<SparseRow> {
        if !rhs.is_finite() {
            return Err(Error::invalid("linear program", "non-finite right-hand side"));
        }
        let mut pairs: Vec<(usize, f64)> = terms.into_iter().collect();
        for &(j, a) in &pairs {
            if j >= self.n_vars() {
                return Err(Error::invalid(
                    "linear program",
                    format!("variable index {j} out of range ({} variables)", self.n_vars()),
                ));
            }
            if !a.is_finite() {
                return Err(Error::invalid("linear program", "non-finite constraint coefficient"));
            }
        }
        pairs.sort_by_key(|&(j, _)| j);
        let mut row = SparseRow::default();
        for (j, a) in pairs {
            if row.indices.last() == Some(&j) {
                *row.values.last_mut().unwrap() += a;
            } else {
                row.indices.push(j);
                row.values.push(a);
            }
        }
        let keep: Vec<bool> = row.values.iter().map(|&a| a != 0.0).collect();
        let mut k = keep.iter();
        row.indices.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        row.values.retain(|_| *k.next().unwrap());
        Ok(row)
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn n_le(&self) -> usize {
        self.le_rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn domains(&self) -> &[VarDomain] {
        &self.domains
    }

    pub fn eq_rows(&self) -> impl Iterator<Item = (&SparseRow, f64)> {
        self.eq_rows.iter().zip(self.eq_rhs.iter().copied())
    }

    pub fn le_rows(&self) -> impl Iterator<Item = (&SparseRow, f64)> {
        self.le_rows.iter().zip(self.le_rhs.iter().copied())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Same program with the objective multiplied by `k`.
    pub fn scale_objective(&self, k: f64) -> Self {
        let mut lp = self.clone();
        lp.objective.iter_mut().for_each(|c| *c *= k);
        lp
    }

    /// Largest constraint or domain violation of `x`, each relative to
    /// `1 + max|rhs|`.
    pub fn violation(&self, x: &[f64]) -> Violation {
        let scale = 1.0
            + self
                .eq_rhs
                .iter()
                .chain(&self.le_rhs)
                .fold(0.0f64, |m, b| m.max(b.abs()));
        let eq = self
            .eq_rows()
            .map(|(row, b)| (row.dot(x) - b).abs())
            .fold(0.0, f64::max);
        let le = self
            .le_rows()
            .map(|(row, b)| (row.dot(x) - b).max(0.0))
            .fold(0.0, f64::max);
        let domain = self
            .domains
            .iter()
            .zip(x)
            .filter(|(d, _)| **d == VarDomain::NonNegative)
            .map(|(_, &v)| (-v).max(0.0))
            .fold(0.0, f64::max);
        Violation {
            equality: eq / scale,
            inequality: le / scale,
            domain: domain / scale,
        }
    }

    /// Plain-text table of the program for inspection. Not a stable format.
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

fn dense_terms(row: &[f64], n: usize) -> Result<Vec<(usize, f64)>> {
    if row.len() != n {
        return Err(Error::invalid(
            "linear program",
            format!("dense row of length {} for {n} variables", row.len()),
        ));
    }
    Ok(row.iter().copied().enumerate().collect())
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.n_vars();
        write!(f, "{:>6}", "")?;
        for j in 0..n {
            let tag = match self.domains[j] {
                VarDomain::NonNegative => "+",
                VarDomain::Free => "~",
            };
            write!(f, " {:>11}", format!("x{j}{tag}"))?;
        }
        writeln!(f, "     rhs")?;
        write!(f, "{:>6}", "min")?;
        for c in &self.objective {
            write!(f, " {c:>11.4e}")?;
        }
        writeln!(f)?;
        let mut dense = vec![0.0; n];
        for (label, rows, op) in [("eq", &self.eq_rows, "="), ("le", &self.le_rows, "<=")] {
            let rhs = if op == "=" { &self.eq_rhs } else { &self.le_rhs };
            for (i, row) in rows.iter().enumerate() {
                dense.iter_mut().for_each(|v| *v = 0.0);
                for (j, a) in row.iter() {
                    dense[j] = a;
                }
                write!(f, "{:>6}", format!("{label}{i}"))?;
                for a in &dense {
                    write!(f, " {a:>11.4e}")?;
                }
                writeln!(f, " {op:>2} {:.6e}", rhs[i])?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub equality: f64,
    pub inequality: f64,
    pub domain: f64,
}

impl Violation {
    pub fn max(&self) -> f64 {
        self.equality.max(self.inequality).max(self.domain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; meaningful only when optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Simplex pivots and bound flips, both phases.
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn failed(status: LpStatus, n: usize, iterations: usize) -> Self {
        LpSolution {
            status,
            x: vec![0.0; n],
            objective: f64::NAN,
            iterations,
        }
    }
}

/// Which program the simplex runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Dual when the program has more constraints than variables.
    #[default]
    Auto,
    Primal,
    Dual,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverOptions {
    pub strategy: Strategy,
    pub pricing: PricingRule,
    /// Iteration cap; `None` picks one from the problem size.
    pub max_iterations: Option<usize>,
}

/// Solves with default options.
pub fn solve(lp: &LinearProgram) -> LpSolution {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LinearProgram, options: &SolverOptions) -> LpSolution {
    let use_dual = match options.strategy {
        Strategy::Primal => false,
        Strategy::Dual => true,
        Strategy::Auto => lp.n_eq() + lp.n_le() > lp.n_vars(),
    };
    let solution = if use_dual {
        dual::solve_via_dual(lp, options)
    } else {
        solve_direct(lp, options)
    };
    if solution.is_optimal() {
        // Reject points that drifted from feasibility rather than report them.
        if lp.violation(&solution.x).max() > 1e-7 {
            log::warn!(
                "simplex result violates constraints by {:e}; reporting numeric failure",
                lp.violation(&solution.x).max()
            );
            return LpSolution::failed(LpStatus::NumericFailure, lp.n_vars(), solution.iterations);
        }
    }
    solution
}

fn solve_direct(lp: &LinearProgram, options: &SolverOptions) -> LpSolution {
    let form = standard::StandardForm::from_primal(lp);
    let out = simplex::run(&form, options);
    match out.status {
        LpStatus::Optimal => {
            let x = out.x[..lp.n_vars()].to_vec();
            LpSolution {
                status: LpStatus::Optimal,
                objective: lp.evaluate(&x),
                x,
                iterations: out.iterations,
            }
        }
        status => LpSolution::failed(status, lp.n_vars(), out.iterations),
    }
}
