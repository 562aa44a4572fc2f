//! Internal computational form: `min c'x + k  s.t.  A x = b,  l <= x <= u`
//! with `A` stored by columns. Inequality rows carry explicit slack columns.

use super::{LinearProgram, VarDomain};

#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub m: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Objective offset left behind by presolve substitutions.
    pub constant: f64,
}

impl StandardForm {
    pub fn new(rhs: Vec<f64>) -> Self {
        StandardForm {
            m: rhs.len(),
            col_start: vec![0],
            row_idx: Vec::new(),
            vals: Vec::new(),
            cost: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            rhs,
            constant: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.cost.len()
    }

    pub fn push_column(
        &mut self,
        entries: impl IntoIterator<Item = (usize, f64)>,
        cost: f64,
        lower: f64,
        upper: f64,
    ) -> usize {
        for (i, a) in entries {
            debug_assert!(i < self.m);
            if a != 0.0 {
                self.row_idx.push(i);
                self.vals.push(a);
            }
        }
        self.col_start.push(self.row_idx.len());
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.n() - 1
    }

    /// Adds a non-negative slack `s` so that row `i` reads `a'x + s = b`.
    pub fn push_slack(&mut self, row: usize) -> usize {
        self.push_column([(row, 1.0)], 0.0, 0.0, f64::INFINITY)
    }

    #[inline]
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.col_start[j], self.col_start[j + 1]);
        (&self.row_idx[s..e], &self.vals[s..e])
    }

    #[inline]
    pub fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        let (rows, vals) = self.column(j);
        rows.iter().zip(vals).map(|(&i, &a)| a * y[i]).sum()
    }

    /// Equality rows first, then inequality rows with their slacks.
    pub fn from_primal(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let mut rhs: Vec<f64> = lp.eq_rows().map(|(_, b)| b).collect();
        rhs.extend(lp.le_rows().map(|(_, b)| b));
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, (row, _)) in lp.eq_rows().chain(lp.le_rows()).enumerate() {
            for (j, a) in row.iter() {
                columns[j].push((i, a));
            }
        }
        let mut form = StandardForm::new(rhs);
        for (j, col) in columns.into_iter().enumerate() {
            let lower = match lp.domains()[j] {
                VarDomain::NonNegative => 0.0,
                VarDomain::Free => f64::NEG_INFINITY,
            };
            form.push_column(col, lp.objective()[j], lower, f64::INFINITY);
        }
        for i in lp.n_eq()..lp.n_eq() + lp.n_le() {
            form.push_slack(i);
        }
        form
    }
}
