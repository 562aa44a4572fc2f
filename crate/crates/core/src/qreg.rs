//! Linear quantile regression by pinball-loss minimization.
//!
//! Each observation `i` carries its own level `q_i`, so one program can pool
//! observations across several quantile levels. The program is
//!
//! ```text
//! minimize    sum_i v_i
//! subject to  v_i >= q_i (y_i - x_i'beta - b)
//!             v_i >= (1 - q_i)(x_i'beta + b - y_i)
//! ```
//!
//! with `beta` either free or restricted to the probability simplex. At the
//! optimum each `v_i` equals the pinball loss of its observation.

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, SolverOptions, VarDomain};

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl Design {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::invalid(
                "design matrix",
                format!("{} values for {n_rows}×{n_cols}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("design matrix", "non-finite entry"));
        }
        Ok(Design { n_rows, n_cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::invalid("design matrix", "ragged rows"));
        }
        Self::new(rows.len(), n_cols, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }
}

/// Restriction on the regression coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficients {
    /// Non-negative, summing to one; never with an intercept.
    Simplex,
    Free {
        intercept: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Auxiliary loss variable of every observation at the optimum.
    pub losses: Vec<f64>,
    /// Sum of the pinball losses.
    pub objective: f64,
    pub iterations: usize,
}

/// Fits `y ≈ X beta (+ b)` under pinball loss with per-observation levels.
pub fn fit(
    design: &Design,
    y: &[f64],
    levels: &[f64],
    coefficients: Coefficients,
    solver: &SolverOptions,
) -> Result<QuantileFit> {
    let lp = build(design, y, levels, coefficients)?;
    let sol = lp::solve_with(&lp, solver);
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    let p = design.n_cols();
    let has_intercept = matches!(coefficients, Coefficients::Free { intercept: true });
    let offset = p + usize::from(has_intercept);
    Ok(QuantileFit {
        coefficients: sol.x[..p].to_vec(),
        intercept: if has_intercept { sol.x[p] } else { 0.0 },
        losses: sol.x[offset..].to_vec(),
        objective: sol.objective,
        iterations: sol.iterations,
    })
}

/// The program solved by [`fit`]; variables are `beta`, then the intercept
/// if any, then one loss variable per observation.
pub fn build(design: &Design, y: &[f64], levels: &[f64], coefficients: Coefficients) -> Result<LinearProgram> {
    let (t_len, p) = (design.n_rows(), design.n_cols());
    if y.len() != t_len || levels.len() != t_len {
        return Err(Error::invalid(
            "quantile regression",
            format!("{t_len} design rows, {} targets, {} levels", y.len(), levels.len()),
        ));
    }
    if p == 0 {
        return Err(Error::invalid("quantile regression", "no regressors"));
    }
    if let Some(&q) = levels.iter().find(|&&q| !(q > 0.0 && q < 1.0)) {
        return Err(Error::parameter("level", format!("{q} is outside (0, 1)")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("quantile regression", "non-finite target"));
    }
    let (beta_domain, intercept) = match coefficients {
        Coefficients::Simplex => (VarDomain::NonNegative, false),
        Coefficients::Free { intercept } => (VarDomain::Free, intercept),
    };
    let offset = p + usize::from(intercept);
    let mut objective = vec![0.0; offset];
    objective.extend(std::iter::repeat_n(1.0, t_len));
    let mut domains = vec![beta_domain; p];
    domains.extend(std::iter::repeat_n(VarDomain::Free, t_len + usize::from(intercept)));

    let mut lp = LinearProgram::new(objective, domains)?;
    if coefficients == Coefficients::Simplex {
        lp.add_eq((0..p).map(|j| (j, 1.0)), 1.0)?;
    }
    let mut terms = Vec::with_capacity(offset + 1);
    for (i, (&yi, &q)) in y.iter().zip(levels).enumerate() {
        let x = design.row(i);
        for (k, scale) in [(-q, -q), (1.0 - q, 1.0 - q)] {
            terms.clear();
            terms.extend(x.iter().enumerate().map(|(j, &a)| (j, k * a)));
            if intercept {
                terms.push((p, k));
            }
            terms.push((offset + i, -1.0));
            lp.add_le(terms.iter().copied(), scale * yi)?;
        }
    }
    Ok(lp)
}
