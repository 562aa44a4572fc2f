//! Brute-force oracle for two-model simplex combinations.
//!
//! With two models the simplex is the segment `w * first + (1 - w) * second`,
//! `w ∈ [0, 1]`, and the pooled pinball objective is convex and piecewise
//! linear in `w`. The oracle scans a regular grid, then narrows the bracket
//! around the best grid point by ternary search, which reaches the exact
//! minimum up to floating-point resolution without involving the LP solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combine::{fit_cqra_shared, fit_cqra_t};
use crate::data::{align, ActualSeries, AlignedDataset, ForecastPanel, QuantileGrid, TimeIndex};
use crate::error::{Error, Result};
use crate::loss::pinball;
use crate::lp::SolverOptions;

/// Pooled observations of a two-model combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoModelProblem {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub y: Vec<f64>,
    pub levels: Vec<f64>,
}

impl TwoModelProblem {
    /// Observations of one level of a two-model dataset.
    pub fn at_level(data: &AlignedDataset, level: usize) -> Result<Self> {
        Self::collect(data, &[level])
    }

    /// Observations of every level, pooled.
    pub fn pooled(data: &AlignedDataset) -> Result<Self> {
        let all: Vec<usize> = (0..data.panel().n_levels()).collect();
        Self::collect(data, &all)
    }

    fn collect(data: &AlignedDataset, levels: &[usize]) -> Result<Self> {
        let panel = data.panel();
        if panel.n_models() != 2 {
            return Err(Error::parameter(
                "panel",
                format!("{} models; the oracle needs 2", panel.n_models()),
            ));
        }
        let mut p = TwoModelProblem {
            first: Vec::new(),
            second: Vec::new(),
            y: Vec::new(),
            levels: Vec::new(),
        };
        for (t, &y) in data.actuals().values().iter().enumerate() {
            for &qi in levels {
                p.first.push(panel.value(0, t, qi));
                p.second.push(panel.value(1, t, qi));
                p.y.push(y);
                p.levels.push(panel.grid().level(qi));
            }
        }
        Ok(p)
    }

    /// Summed pinball loss of the combination with weight `w` on the first
    /// model.
    pub fn objective(&self, w: f64) -> f64 {
        (0..self.y.len())
            .map(|i| {
                pinball(
                    w * self.first[i] + (1.0 - w) * self.second[i],
                    self.y[i],
                    self.levels[i],
                )
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    /// Best grid point and its objective.
    pub grid_weight: f64,
    pub grid_min: f64,
    /// Minimum after ternary refinement of the bracket around the grid point.
    pub refined_weight: f64,
    pub refined_min: f64,
}

/// Scans `w = 0, step, 2 step, ..., 1` and refines around the best point.
pub fn grid_search(problem: &TwoModelProblem, step: f64) -> GridSearch {
    assert!(step > 0.0 && step <= 1.0, "grid step must lie in (0, 1]");
    let k_max = (1.0 / step).round() as usize;
    let point = |k: usize| (k as f64 * step).min(1.0);
    let (mut best_k, mut best) = (0, f64::INFINITY);
    for k in 0..=k_max {
        let v = problem.objective(point(k));
        if v < best {
            best = v;
            best_k = k;
        }
    }
    let (mut lo, mut hi) = (point(best_k.saturating_sub(1)), point((best_k + 1).min(k_max)));
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if problem.objective(m1) <= problem.objective(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mid = 0.5 * (lo + hi);
    let (refined_weight, refined_min) = [(point(best_k), best), (mid, problem.objective(mid))]
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    GridSearch {
        grid_weight: point(best_k),
        grid_min: best,
        refined_weight,
        refined_min,
    }
}

/// Random two-model dataset: actuals around a smooth curve and two biased,
/// noisy quantile forecasters.
pub fn random_two_model_dataset(seed: u64, t_len: usize, grid: &QuantileGrid) -> Result<AlignedDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let time = TimeIndex::regular(0, 3600, t_len)?;
    let y: Vec<f64> = (0..t_len)
        .map(|t| 100.0 + 20.0 * (t as f64 * 0.3).sin() + rng.random_range(-15.0..15.0))
        .collect();
    let bias = [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)];
    let spread = [rng.random_range(2.0..12.0), rng.random_range(2.0..12.0)];
    let mut values = Vec::with_capacity(2 * t_len * grid.len());
    for &yt in &y {
        for n in 0..2 {
            let center = yt + bias[n] + rng.random_range(-10.0..10.0);
            for &q in grid.levels() {
                values.push(center + spread[n] * (q - 0.5) * 4.0);
            }
        }
    }
    let panel = ForecastPanel::new(vec!["m1".into(), "m2".into()], time.clone(), grid.clone(), values)?;
    align(panel, ActualSeries::new(time, y)?)
}

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTrial {
    pub seed: u64,
    /// The instance itself, enough to replay the comparison.
    pub problem: TwoModelProblem,
    pub lp_objective: f64,
    pub lp_weight: f64,
    pub search: GridSearch,
    pub relative_gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub trials: usize,
    pub seed: u64,
    pub t_len: usize,
    pub step: f64,
    pub tolerance: f64,
    pub solver: SolverOptions,
    /// Test hook: replaces the solver's weights with a deliberately poor
    /// choice so that the comparison must fail.
    pub corrupt: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            trials: 100,
            seed: 0,
            t_len: 50,
            step: 1e-4,
            tolerance: 1e-6,
            solver: SolverOptions::default(),
            corrupt: false,
        }
    }
}

/// Compares CQRA-T at a single level with the grid oracle on `trials`
/// random instances. Instance `i` uses seed `seed + i`.
pub fn run_oracle_check(options: &OracleOptions) -> Result<Vec<OracleTrial>> {
    if options.trials == 0 {
        return Err(Error::parameter("trials", "must be at least 1"));
    }
    let grid = QuantileGrid::new(vec![0.5])?;
    (0..options.trials as u64)
        .map(|i| {
            let seed = options.seed.wrapping_add(i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
            let level = QuantileGrid::new(vec![rng.random_range(0.05..0.95)])?;
            let data = random_two_model_dataset(seed, options.t_len, if i % 4 == 0 { &grid } else { &level })?;
            let fit = fit_cqra_t(&data, 0, &options.solver)?;
            let problem = TwoModelProblem::at_level(&data, 0)?;
            let mut w = fit.coefficients[0];
            if options.corrupt {
                w = if w > 0.5 { 0.0 } else { 1.0 };
            }
            let lp_objective = if options.corrupt {
                problem.objective(w)
            } else {
                fit.objective * data.len() as f64
            };
            let search = grid_search(&problem, options.step);
            let relative_gap = compare(lp_objective, &search);
            Ok(OracleTrial {
                seed,
                problem,
                lp_objective,
                lp_weight: w,
                search,
                relative_gap,
                passed: relative_gap <= options.tolerance,
            })
        })
        .collect()
}

/// Relative gap between an LP optimum and the refined oracle minimum.
pub fn compare(lp_objective: f64, search: &GridSearch) -> f64 {
    (lp_objective - search.refined_min).abs() / search.refined_min.abs().max(1e-12)
}

/// Shared-weight counterpart of [`run_oracle_check`] on one instance.
pub fn shared_trial(
    seed: u64,
    t_len: usize,
    grid: &QuantileGrid,
    step: f64,
    solver: &SolverOptions,
) -> Result<OracleTrial> {
    let data = random_two_model_dataset(seed, t_len, grid)?;
    let fit = fit_cqra_shared(&data, solver)?;
    let problem = TwoModelProblem::pooled(&data)?;
    let lp_objective = fit.objective * data.len() as f64;
    let search = grid_search(&problem, step);
    let relative_gap = compare(lp_objective, &search);
    Ok(OracleTrial {
        seed,
        problem,
        lp_objective,
        lp_weight: fit.coefficients[0],
        search,
        relative_gap,
        passed: relative_gap <= 1e-6,
    })
}
