//! Bounded-variable revised primal simplex with an explicit dense basis
//! inverse, product-form updates and periodic refactorization.
//!
//! Phase one minimizes the sum of artificial variables added to rows that no
//! unit column can cover at the starting point. Pricing is Dantzig's rule
//! with lowest-index tie-breaking; after a run of degenerate pivots the
//! solver switches to Bland's rule until progress resumes. The ratio test is
//! Harris's two-pass test.

use serde::{Deserialize, Serialize};

use super::standard::StandardForm;
use super::{LpStatus, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingRule {
    /// Largest reduced cost, Bland fallback on stalls.
    #[default]
    Dantzig,
    /// Lowest eligible index throughout.
    Bland,
}

const REFACTOR_INTERVAL: usize = 100;
const DEGENERATE_RUN_LIMIT: usize = 50;
const REL_TOL: f64 = 1e-9;

pub(crate) struct SimplexOutput {
    pub status: LpStatus,
    /// Values of the form's columns (artificials dropped).
    pub x: Vec<f64>,
    /// Simplex multipliers `pi = B^-T c_B` at the final basis.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Free variable parked at zero.
    Zero,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

struct Solver<'a> {
    form: &'a StandardForm,
    m: usize,
    n: usize,
    art_row: Vec<usize>,
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    head: Vec<usize>,
    /// Column-major: `binv[k * m + i]` is entry (i, k) of the basis inverse.
    binv: Vec<f64>,
    feas_tol: f64,
    opt_tol: f64,
    rule: PricingRule,
    configured_rule: PricingRule,
    degenerate_run: usize,
    iterations: usize,
    since_refactor: usize,
    max_iterations: usize,
    // scratch
    pi: Vec<f64>,
    alpha: Vec<f64>,
}

pub(crate) fn run(form: &StandardForm, options: &SolverOptions) -> SimplexOutput {
    let mut solver = Solver::new(form, options);
    let status = solver.solve();
    let x = solver.x[..solver.n].to_vec();
    SimplexOutput {
        status,
        x,
        duals: solver.pi.clone(),
        iterations: solver.iterations,
    }
}

impl<'a> Solver<'a> {
    fn new(form: &'a StandardForm, options: &SolverOptions) -> Self {
        let (m, n) = (form.m, form.n());
        let b_scale = form.rhs.iter().fold(1.0f64, |s, b| s.max(b.abs()));
        let c_scale = form.cost.iter().fold(1.0f64, |s, c| s.max(c.abs()));
        Solver {
            form,
            m,
            n,
            art_row: Vec::new(),
            art_sign: Vec::new(),
            lower: form.lower.clone(),
            upper: form.upper.clone(),
            cost: form.cost.clone(),
            x: vec![0.0; n],
            state: vec![State::Lower; n],
            head: vec![usize::MAX; m],
            binv: vec![0.0; m * m],
            feas_tol: REL_TOL * b_scale,
            opt_tol: REL_TOL * c_scale,
            rule: options.pricing,
            configured_rule: options.pricing,
            degenerate_run: 0,
            iterations: 0,
            since_refactor: 0,
            max_iterations: options.max_iterations.unwrap_or(50 * (m + n) + 10_000),
            pi: vec![0.0; m],
            alpha: vec![0.0; m],
        }
    }

    fn n_total(&self) -> usize {
        self.n + self.art_row.len()
    }

    #[inline]
    fn for_each_entry(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            let (rows, vals) = self.form.column(j);
            for (&i, &a) in rows.iter().zip(vals) {
                f(i, a);
            }
        } else {
            let k = j - self.n;
            f(self.art_row[k], self.art_sign[k]);
        }
    }

    #[inline]
    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.form.dot_column(j, y)
        } else {
            let k = j - self.n;
            self.art_sign[k] * y[self.art_row[k]]
        }
    }

    fn solve(&mut self) -> LpStatus {
        self.crash();
        let needs_phase_one = !self.art_row.is_empty();
        if needs_phase_one {
            self.cost = vec![0.0; self.n_total()];
            for j in self.n..self.n_total() {
                self.cost[j] = 1.0;
            }
            match self.iterate() {
                Ok(()) => {}
                Err(status) => return status,
            }
            let infeasibility: f64 = (self.n..self.n_total()).map(|j| self.x[j].max(0.0)).sum();
            if infeasibility > self.feas_tol * (1 + self.art_row.len()) as f64 {
                return LpStatus::Infeasible;
            }
            for j in self.n..self.n_total() {
                self.upper[j] = 0.0;
                if self.state[j] != State::Basic {
                    self.state[j] = State::Lower;
                    self.x[j] = 0.0;
                }
            }
            self.cost = self.form.cost.clone();
            self.cost.resize(self.n_total(), 0.0);
            self.rule = self.configured_rule;
            self.degenerate_run = 0;
        }
        match self.iterate() {
            Ok(()) => LpStatus::Optimal,
            Err(status) => status,
        }
    }

    /// Places nonbasic variables at a bound and builds a diagonal starting
    /// basis of unit columns, adding artificials where none fits.
    fn crash(&mut self) {
        for j in 0..self.n {
            let (l, u) = (self.lower[j], self.upper[j]);
            let (state, value) = if l.is_finite() {
                (State::Lower, l)
            } else if u.is_finite() {
                (State::Upper, u)
            } else {
                (State::Zero, 0.0)
            };
            self.state[j] = state;
            self.x[j] = value;
        }
        let mut residual = self.form.rhs.clone();
        for j in 0..self.n {
            if self.x[j] != 0.0 {
                let v = self.x[j];
                let (rows, vals) = self.form.column(j);
                for (&i, &a) in rows.iter().zip(vals) {
                    residual[i] -= a * v;
                }
            }
        }
        // Unit columns able to absorb each row's residual with a feasible value.
        let mut unit_for_row = vec![usize::MAX; self.m];
        for j in 0..self.n {
            let (rows, vals) = self.form.column(j);
            if rows.len() != 1
                || self.state[j] != State::Lower
                || self.lower[j] != 0.0
                || self.upper[j] != f64::INFINITY
            {
                continue;
            }
            let (i, a) = (rows[0], vals[0]);
            if unit_for_row[i] == usize::MAX && a > 0.0 && residual[i] >= 0.0 {
                unit_for_row[i] = j;
            }
        }
        let m = self.m;
        for i in 0..m {
            let j = unit_for_row[i];
            if j != usize::MAX {
                let a = self.form.column(j).1[0];
                self.head[i] = j;
                self.state[j] = State::Basic;
                self.x[j] = residual[i] / a;
                self.binv[i * m + i] = 1.0 / a;
            } else {
                let sign = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
                self.art_row.push(i);
                self.art_sign.push(sign);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.cost.push(0.0);
                self.x.push(residual[i].abs());
                self.state.push(State::Basic);
                self.head[i] = self.n_total() - 1;
                self.binv[i * m + i] = sign;
            }
        }
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        for k in 0..m {
            let col = &self.binv[k * m..(k + 1) * m];
            self.pi[k] = col.iter().zip(&self.head).map(|(&b, &h)| b * self.cost[h]).sum();
        }
    }

    fn compute_alpha(&mut self, j: usize) {
        let m = self.m;
        let mut alpha = std::mem::take(&mut self.alpha);
        alpha.iter_mut().for_each(|a| *a = 0.0);
        self.for_each_entry(j, |k, a| {
            let col = &self.binv[k * m..(k + 1) * m];
            for (dst, &b) in alpha.iter_mut().zip(col) {
                *dst += a * b;
            }
        });
        self.alpha = alpha;
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cost[j] - self.dot_column(j, &self.pi)
    }

    /// Entering variable and direction (+1 increase, -1 decrease).
    fn price(&self) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n_total() {
            let state = self.state[j];
            if state == State::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let dir = match state {
                State::Lower if d < -self.opt_tol => 1.0,
                State::Upper if d > self.opt_tol => -1.0,
                State::Zero if d.abs() > self.opt_tol => -d.signum(),
                _ => continue,
            };
            match self.rule {
                PricingRule::Bland => return Some((j, dir, d)),
                PricingRule::Dantzig => {
                    if best.is_none_or(|(_, _, bd)| d.abs() > bd.abs()) {
                        best = Some((j, dir, d));
                    }
                }
            }
        }
        best
    }

    fn iterate(&mut self) -> Result<(), LpStatus> {
        let mut verified_once = false;
        loop {
            if self.iterations >= self.max_iterations {
                log::warn!("simplex hit the iteration cap ({})", self.max_iterations);
                return Err(LpStatus::NumericFailure);
            }
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor()?;
            }
            self.compute_duals();
            match self.step() {
                Step::Moved => {
                    verified_once = false;
                }
                Step::Unbounded => return Err(LpStatus::Unbounded),
                Step::Optimal => {
                    if verified_once {
                        return Ok(());
                    }
                    // Confirm on a fresh factorization before declaring victory.
                    self.refactor()?;
                    self.compute_duals();
                    verified_once = true;
                    if self.price().is_none() {
                        return Ok(());
                    }
                }
            }
        }
    }

    fn step(&mut self) -> Step {
        let Some((q, dir, d)) = self.price() else {
            return Step::Optimal;
        };
        self.compute_alpha(q);
        let (theta, leave) = match self.ratio_test(q, dir) {
            Some(r) => r,
            None => return Step::Unbounded,
        };

        self.x[q] += dir * theta;
        for i in 0..self.m {
            let a = self.alpha[i];
            if a != 0.0 {
                self.x[self.head[i]] -= dir * a * theta;
            }
        }
        match leave {
            None => {
                // Bound flip of the entering variable.
                if dir > 0.0 {
                    self.state[q] = State::Upper;
                    self.x[q] = self.upper[q];
                } else {
                    self.state[q] = State::Lower;
                    self.x[q] = self.lower[q];
                }
            }
            Some((r, to_upper)) => {
                let out = self.head[r];
                if to_upper {
                    self.state[out] = State::Upper;
                    self.x[out] = self.upper[out];
                } else if self.lower[out].is_finite() {
                    self.state[out] = State::Lower;
                    self.x[out] = self.lower[out];
                } else {
                    self.state[out] = State::Zero;
                    self.x[out] = 0.0;
                }
                self.state[q] = State::Basic;
                self.head[r] = q;
                self.pivot(r);
            }
        }
        self.iterations += 1;

        let progress = theta * d.abs();
        if progress <= 1e-12 * (1.0 + self.opt_tol) {
            self.degenerate_run += 1;
            if self.degenerate_run > DEGENERATE_RUN_LIMIT {
                self.rule = PricingRule::Bland;
            }
        } else {
            self.degenerate_run = 0;
            self.rule = self.configured_rule;
        }
        Step::Moved
    }

    /// Returns the step length and the leaving row (with whether the leaving
    /// variable exits at its upper bound), or `None` for the flip case.
    #[allow(clippy::type_complexity)]
    fn ratio_test(&self, q: usize, dir: f64) -> Option<(f64, Option<(usize, bool)>)> {
        let alpha_max = self.alpha.iter().fold(0.0f64, |s, a| s.max(a.abs()));
        let pivot_tol = (1e-9 * alpha_max).max(1e-11);
        let harris = self.rule == PricingRule::Dantzig;
        let delta = if harris { self.feas_tol } else { 0.0 };

        // Pass one: largest step keeping every basic variable within its
        // bounds relaxed by `delta`.
        let mut theta_max = f64::INFINITY;
        for i in 0..self.m {
            let a = self.alpha[i];
            if a.abs() <= pivot_tol {
                continue;
            }
            let rate = -dir * a;
            let b = self.head[i];
            let t = if rate < 0.0 {
                if !self.lower[b].is_finite() {
                    continue;
                }
                ((self.x[b] - self.lower[b]).max(0.0) + delta) / -rate
            } else {
                if !self.upper[b].is_finite() {
                    continue;
                }
                ((self.upper[b] - self.x[b]).max(0.0) + delta) / rate
            };
            theta_max = theta_max.min(t);
        }

        let range = self.upper[q] - self.lower[q];
        if theta_max == f64::INFINITY && range == f64::INFINITY {
            return None;
        }
        if range <= theta_max {
            return Some((range, None));
        }

        // Pass two: among rows whose exact ratio fits under `theta_max`, take
        // the largest pivot (or, under Bland, the lowest variable index).
        let tie = if harris { 0.0 } else { 1e-12 * (1.0 + theta_max) };
        let mut chosen: Option<(usize, f64, bool)> = None;
        for i in 0..self.m {
            let a = self.alpha[i];
            if a.abs() <= pivot_tol {
                continue;
            }
            let rate = -dir * a;
            let b = self.head[i];
            let (t, to_upper) = if rate < 0.0 {
                if !self.lower[b].is_finite() {
                    continue;
                }
                ((self.x[b] - self.lower[b]).max(0.0) / -rate, false)
            } else {
                if !self.upper[b].is_finite() {
                    continue;
                }
                ((self.upper[b] - self.x[b]).max(0.0) / rate, true)
            };
            if t > theta_max + tie {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((ci, ct, _)) => {
                    if harris {
                        a.abs() > self.alpha[ci].abs()
                    } else {
                        t < ct - tie || (t <= ct + tie && b < self.head[ci])
                    }
                }
            };
            if better {
                chosen = Some((i, t, to_upper));
            }
        }
        let (r, t, to_upper) = chosen?;
        Some((t, Some((r, to_upper))))
    }

    /// Product-form update of the basis inverse after row `r` pivots on the
    /// current `alpha`.
    fn pivot(&mut self, r: usize) {
        let m = self.m;
        let pivot = self.alpha[r];
        for k in 0..m {
            let col = &mut self.binv[k * m..(k + 1) * m];
            let scaled = col[r] / pivot;
            if scaled != 0.0 {
                for (i, v) in col.iter_mut().enumerate() {
                    if i != r {
                        *v -= self.alpha[i] * scaled;
                    }
                }
            }
            col[r] = scaled;
        }
        self.since_refactor += 1;
    }

    /// Recomputes the basis inverse from scratch and the basic values from
    /// the nonbasic ones.
    fn refactor(&mut self) -> Result<(), LpStatus> {
        let m = self.m;
        // Dense basis, column-major.
        let mut basis = vec![0.0; m * m];
        for (k, &j) in self.head.iter().enumerate() {
            let col = &mut basis[k * m..(k + 1) * m];
            self.for_each_entry(j, |i, a| col[i] += a);
        }
        self.binv = invert(&basis, m).ok_or_else(|| {
            log::warn!("singular basis during refactorization");
            LpStatus::NumericFailure
        })?;
        let mut residual = self.form.rhs.clone();
        for j in 0..self.n_total() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                let v = self.x[j];
                self.for_each_entry(j, |i, a| residual[i] -= a * v);
            }
        }
        for i in 0..m {
            let mut v = 0.0;
            for (k, &r) in residual.iter().enumerate() {
                v += self.binv[k * m + i] * r;
            }
            self.x[self.head[i]] = v;
        }
        self.since_refactor = 0;
        Ok(())
    }
}

/// Gauss-Jordan inverse with partial pivoting; column-major in and out.
fn invert(a: &[f64], m: usize) -> Option<Vec<f64>> {
    // Work row-major on [A | I].
    let w = 2 * m;
    let mut aug = vec![0.0; m * w];
    for i in 0..m {
        for k in 0..m {
            aug[i * w + k] = a[k * m + i];
        }
        aug[i * w + m + i] = 1.0;
    }
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    for c in 0..m {
        let p = (c..m)
            .max_by(|&x, &y| aug[x * w + c].abs().total_cmp(&aug[y * w + c].abs()))
            .unwrap();
        if aug[p * w + c].abs() <= 1e-13 * scale {
            return None;
        }
        if p != c {
            for k in 0..w {
                aug.swap(c * w + k, p * w + k);
            }
        }
        let inv = 1.0 / aug[c * w + c];
        for k in 0..w {
            aug[c * w + k] *= inv;
        }
        let pivot_row = aug[c * w..(c + 1) * w].to_vec();
        for i in 0..m {
            if i == c {
                continue;
            }
            let f = aug[i * w + c];
            if f != 0.0 {
                let row = &mut aug[i * w..(i + 1) * w];
                for (v, &p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            inv[k * m + i] = aug[i * w + m + k];
        }
    }
    Some(inv)
}
