//! Solving a program through its dual.
//!
//! For `min c'x` with `A_eq x = b_eq`, `A_le x <= b_le` the dual is written as
//!
//! ```text
//! minimize    -b_eq'y + b_le'w
//! subject to  (A_eq'y - A_le'w)_j <= c_j   for x_j >= 0
//!             (A_eq'y - A_le'w)_j  = c_j   for x_j free
//!             y free, w >= 0
//! ```
//!
//! with one row per primal variable. The primal optimum is the negated
//! vector of row multipliers. Equality rows holding exactly two
//! non-negative columns with same-signed coefficients are eliminated before
//! the simplex runs: one column is substituted out and the other gains an
//! upper bound. Multipliers of eliminated rows are rebuilt afterwards from
//! the reduced costs of their two columns.

use super::standard::StandardForm;
use super::{simplex, LinearProgram, LpSolution, LpStatus, SolverOptions, VarDomain};

/// Largest program handed back to the direct solver when the dual is
/// infeasible and the primal status is ambiguous.
const DIRECT_FALLBACK_LIMIT: usize = 4000;

struct Doubleton {
    row: usize,
    alpha: f64,
    beta: f64,
    sign: f64,
    a_cost: f64,
    b_cost: f64,
    a_entries: Vec<(usize, f64)>,
    b_entries: Vec<(usize, f64)>,
}

pub(crate) fn solve_via_dual(lp: &LinearProgram, options: &SolverOptions) -> LpSolution {
    let n = lp.n_vars();
    let n_eq = lp.n_eq();
    let n_cols = n_eq + lp.n_le();

    // Dual columns, entries indexed by primal variable (dual row).
    let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n_cols);
    let mut cost = Vec::with_capacity(n_cols);
    let mut lower = Vec::with_capacity(n_cols);
    for (row, b) in lp.eq_rows() {
        cols.push(row.iter().collect());
        cost.push(-b);
        lower.push(f64::NEG_INFINITY);
    }
    for (row, b) in lp.le_rows() {
        cols.push(row.iter().map(|(j, a)| (j, -a)).collect());
        cost.push(b);
        lower.push(0.0);
    }
    let mut upper = vec![f64::INFINITY; n_cols];
    let mut rhs = lp.objective().to_vec();

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (c, col) in cols.iter().enumerate() {
        for &(j, g) in col {
            rows[j].push((c, g));
        }
    }

    // Doubleton presolve.
    let mut touched = vec![false; n_cols];
    let mut eliminated = vec![false; n_cols];
    let mut removed = vec![false; n];
    let mut constant = 0.0;
    let mut doubletons = Vec::new();
    for j in 0..n {
        if lp.domains()[j] != VarDomain::Free || rows[j].len() != 2 {
            continue;
        }
        let [(a, ga), (b, gb)] = [rows[j][0], rows[j][1]];
        if touched[a] || touched[b] || lower[a] != 0.0 || lower[b] != 0.0 || ga.signum() != gb.signum() {
            continue;
        }
        let sign = ga.signum();
        let (alpha, beta, h) = (ga * sign, gb * sign, rhs[j] * sign);
        if h < 0.0 {
            continue;
        }
        touched[a] = true;
        touched[b] = true;
        doubletons.push(Doubleton {
            row: j,
            alpha,
            beta,
            sign,
            a_cost: cost[a],
            b_cost: cost[b],
            a_entries: cols[a].clone(),
            b_entries: cols[b].clone(),
        });

        // b = (h - alpha a) / beta
        let ratio = alpha / beta;
        for &(i, g) in &cols[b].clone() {
            if i == j {
                continue;
            }
            rhs[i] -= g * h / beta;
            cols[a].push((i, -ratio * g));
        }
        merge_entries(&mut cols[a]);
        cols[a].retain(|&(i, _)| i != j);
        constant += cost[b] * h / beta;
        cost[a] -= cost[b] * ratio;
        upper[a] = h / alpha;
        eliminated[b] = true;
        removed[j] = true;
    }

    // Reduced standard form.
    let mut new_index = vec![usize::MAX; n];
    let mut kept = Vec::new();
    for j in 0..n {
        if !removed[j] {
            new_index[j] = kept.len();
            kept.push(j);
        }
    }
    let mut form = StandardForm::new(kept.iter().map(|&j| rhs[j]).collect());
    form.constant = constant;
    for c in 0..n_cols {
        if eliminated[c] {
            continue;
        }
        let entries = cols[c]
            .iter()
            .filter(|&&(i, _)| !removed[i])
            .map(|&(i, g)| (new_index[i], g));
        form.push_column(entries, cost[c], lower[c], upper[c]);
    }
    for (r, &j) in kept.iter().enumerate() {
        if lp.domains()[j] == VarDomain::NonNegative {
            form.push_slack(r);
        }
    }

    log::debug!(
        "dual solve: {} rows ({} eliminated), {} columns",
        form.m,
        doubletons.len(),
        form.n()
    );
    let out = simplex::run(&form, options);
    match out.status {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => return LpSolution::failed(LpStatus::Infeasible, n, out.iterations),
        LpStatus::Infeasible => {
            let size = n + lp.n_eq() + lp.n_le();
            if size <= DIRECT_FALLBACK_LIMIT {
                let mut direct = super::solve_direct(lp, options);
                direct.iterations += out.iterations;
                return direct;
            }
            return LpSolution::failed(LpStatus::Unbounded, n, out.iterations);
        }
        LpStatus::NumericFailure => return LpSolution::failed(LpStatus::NumericFailure, n, out.iterations),
    }

    // Postsolve multipliers.
    let mut pi = vec![0.0; n];
    for (r, &j) in kept.iter().enumerate() {
        pi[j] = out.duals[r];
    }
    for d in doubletons.iter().rev() {
        let partial = |f: f64, entries: &[(usize, f64)]| {
            f - entries
                .iter()
                .filter(|&&(i, _)| i != d.row)
                .map(|&(i, g)| g * pi[i])
                .sum::<f64>()
        };
        let ra = partial(d.a_cost, &d.a_entries);
        let rb = partial(d.b_cost, &d.b_entries);
        let rho = (ra / d.alpha).min(rb / d.beta);
        pi[d.row] = d.sign * rho;
    }

    let x: Vec<f64> = pi.iter().map(|p| -p).collect();
    LpSolution {
        status: LpStatus::Optimal,
        objective: lp.evaluate(&x),
        x,
        iterations: out.iterations,
    }
}

fn merge_entries(entries: &mut Vec<(usize, f64)>) {
    entries.sort_by_key(|&(i, _)| i);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for &(i, g) in entries.iter() {
        match merged.last_mut() {
            Some(last) if last.0 == i => last.1 += g,
            _ => merged.push((i, g)),
        }
    }
    merged.retain(|&(_, g)| g != 0.0);
    *entries = merged;
}
