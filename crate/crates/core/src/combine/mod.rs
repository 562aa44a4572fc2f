//! Combination methods: fitting on a fit span and predicting on new panels.

mod method;

pub use method::MethodTag;

use crate::data::{
    AlignedDataset, CombinationModel, CombinedForecast, FitDiagnostics, ForecastPanel, QuantileGrid, RegressorKind,
    WeightProfile,
};
use crate::error::{Error, Result};
use crate::loss::{loss_table, mean_pinball, LossTable};
use crate::lp::{LpStatus, SolverOptions};
use crate::par::{self, Execution};
use crate::qreg::{self, Coefficients, Design};
use crate::rearrange::rearrange_row;

/// Regressor vectors of one kind drawn from a panel.
#[derive(Debug, Clone, Copy)]
pub struct RegressorView<'a> {
    panel: &'a ForecastPanel,
    kind: RegressorKind,
}

impl<'a> RegressorView<'a> {
    pub fn new(panel: &'a ForecastPanel, kind: RegressorKind) -> Self {
        RegressorView { panel, kind }
    }

    pub fn kind(&self) -> RegressorKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.kind.width(self.panel.n_models(), self.panel.n_levels())
    }

    /// Appends the regressors for time `t` and level index `level` to `out`.
    pub fn extend_row(&self, t: usize, level: usize, out: &mut Vec<f64>) {
        match self.kind {
            RegressorKind::Targeted => out.extend(self.panel.targeted_at(t, level)),
            RegressorKind::All => out.extend_from_slice(self.panel.all_at(t)),
            RegressorKind::Averaged => out.extend(self.panel.averaged_at(t)),
        }
    }

    pub fn row(&self, t: usize, level: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        self.extend_row(t, level, &mut out);
        out
    }

    /// Design matrix over all time steps for one level.
    pub fn design(&self, level: usize) -> Result<Design> {
        let t_len = self.panel.n_times();
        let mut values = Vec::with_capacity(t_len * self.width());
        for t in 0..t_len {
            self.extend_row(t, level, &mut values);
        }
        Design::new(t_len, self.width(), values)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitOptions {
    /// Adds a free intercept to the unconstrained regressions.
    pub intercept: bool,
    /// Select the best individual model separately at each level.
    pub bi_per_level: bool,
    pub solver: SolverOptions,
    pub execution: Execution,
}

/// Result of one per-level regression fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Auxiliary loss variables at the optimum, one per time step.
    pub losses: Vec<f64>,
    /// Mean in-sample pinball loss.
    pub objective: f64,
    pub iterations: usize,
}

/// Fits `method` on `data`.
pub fn fit(method: MethodTag, data: &AlignedDataset, options: &FitOptions) -> Result<CombinationModel> {
    let panel = data.panel();
    let (n, q) = (panel.n_models(), panel.n_levels());
    let fit_len = data.len();
    let ids = panel.model_ids().to_vec();
    let grid = panel.grid().clone();
    let simple = |per_level: Vec<Vec<f64>>| WeightProfile {
        method,
        regressor_kind: RegressorKind::Targeted,
        constrained: true,
        per_level,
        intercept_per_level: None,
    };

    let (profile, iterations) = match method {
        MethodTag::Ns | MethodTag::Med => (None, vec![0; q]),
        MethodTag::Sa => (Some(simple(vec![vec![1.0 / n as f64; n]; q])), vec![0; q]),
        MethodTag::Bi => {
            let table = loss_table(panel, data.actuals())?;
            let pick = |qi: usize| {
                if options.bi_per_level {
                    table.best_model_at(qi)
                } else {
                    table.best_model()
                }
            };
            let per_level = (0..q).map(|qi| one_hot(n, pick(qi))).collect();
            (Some(simple(per_level)), vec![0; q])
        }
        MethodTag::Wa => {
            let table = loss_table(panel, data.actuals())?;
            (
                Some(simple((0..q).map(|qi| weights_wa(&table, qi)).collect())),
                vec![0; q],
            )
        }
        MethodTag::CqraShared => {
            let level_fit = fit_cqra_shared(data, &options.solver)?;
            // One program for all levels; its pivots are booked on the first.
            let mut iterations = vec![0; q];
            iterations[0] = level_fit.iterations;
            (Some(simple(vec![level_fit.coefficients; q])), iterations)
        }
        _ => {
            let (kind, constrained) = method.regression().expect("regression method");
            let fits = par::try_map(options.execution, (0..q).collect(), |qi| {
                fit_qra(kind, constrained, data, qi, options)
                    .map_err(|e| with_context(e, method, grid.level(qi), constrained))
            })?;
            let iterations = fits.iter().map(|f| f.iterations).collect();
            let intercepts = (!constrained && options.intercept).then(|| fits.iter().map(|f| f.intercept).collect());
            let profile = WeightProfile {
                method,
                regressor_kind: kind,
                constrained,
                per_level: fits.into_iter().map(|f| f.coefficients).collect(),
                intercept_per_level: intercepts,
            };
            (Some(profile), iterations)
        }
    };

    let model = CombinationModel::new(
        method,
        ids.clone(),
        grid.clone(),
        profile.clone(),
        FitDiagnostics::default(),
    )?;
    let in_sample_forecast = predict(&model, panel, false)?;
    let in_sample = (0..q)
        .map(|qi| {
            let column: Vec<f64> = (0..fit_len).map(|t| in_sample_forecast.value(t, qi)).collect();
            mean_pinball(&column, data.actuals().values(), grid.level(qi))
        })
        .collect();
    let diagnostics = FitDiagnostics {
        in_sample,
        iterations,
        fit_len,
    };
    CombinationModel::new(method, ids, grid, profile, diagnostics)
}

fn one_hot(n: usize, k: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    w[k] = 1.0;
    w
}

fn with_context(err: Error, method: MethodTag, level: f64, constrained: bool) -> Error {
    match err {
        // The uniform vector is always feasible for a simplex-constrained fit.
        Error::Lp(LpStatus::Infeasible) if constrained => {
            Error::Internal(format!("{method} program at level {level} reported infeasible"))
        }
        Error::Lp(status) => Error::Solver { method, level, status },
        other => other,
    }
}

/// Per-level pinball regression of the actuals on one regressor view.
pub fn fit_qra(
    kind: RegressorKind,
    constrained: bool,
    data: &AlignedDataset,
    level: usize,
    options: &FitOptions,
) -> Result<LevelFit> {
    let panel = data.panel();
    if level >= panel.n_levels() {
        return Err(Error::parameter("level", format!("index {level} outside the grid")));
    }
    let view = RegressorView::new(panel, kind);
    let design = view.design(level)?;
    if data.len() < design.n_cols() {
        log::warn!(
            "{kind:?} regression at level {} has {} observations for {} regressors; fit is underdetermined",
            panel.grid().level(level),
            data.len(),
            design.n_cols()
        );
    }
    let coefficients = if constrained {
        Coefficients::Simplex
    } else {
        Coefficients::Free {
            intercept: options.intercept,
        }
    };
    let levels = vec![panel.grid().level(level); data.len()];
    let fit = qreg::fit(&design, data.actuals().values(), &levels, coefficients, &options.solver)?;
    Ok(LevelFit {
        objective: fit.objective / data.len() as f64,
        coefficients: fit.coefficients,
        intercept: fit.intercept,
        losses: fit.losses,
        iterations: fit.iterations,
    })
}

/// Simplex weights on the targeted quantiles at one level.
pub fn fit_cqra_t(data: &AlignedDataset, level: usize, solver: &SolverOptions) -> Result<LevelFit> {
    let options = FitOptions {
        solver: solver.clone(),
        ..FitOptions::default()
    };
    fit_qra(RegressorKind::Targeted, true, data, level, &options)
        .map_err(|e| with_context(e, MethodTag::CqraT, data.panel().grid().level(level), true))
}

/// One simplex weight vector minimizing the pinball loss pooled over every
/// level. The reported objective is the mean over time of the loss summed
/// over levels; `losses` are ordered time-major, level-minor.
pub fn fit_cqra_shared(data: &AlignedDataset, solver: &SolverOptions) -> Result<LevelFit> {
    let panel = data.panel();
    let (n, q, t_len) = (panel.n_models(), panel.n_levels(), data.len());
    let mut values = Vec::with_capacity(t_len * q * n);
    let mut y = Vec::with_capacity(t_len * q);
    let mut levels = Vec::with_capacity(t_len * q);
    for (t, &yt) in data.actuals().values().iter().enumerate() {
        for qi in 0..q {
            values.extend(panel.targeted_at(t, qi));
            y.push(yt);
            levels.push(panel.grid().level(qi));
        }
    }
    let design = Design::new(t_len * q, n, values)?;
    let fit = qreg::fit(&design, &y, &levels, Coefficients::Simplex, solver)
        .map_err(|e| with_context(e, MethodTag::CqraShared, f64::NAN, true))?;
    Ok(LevelFit {
        objective: fit.objective / t_len as f64,
        coefficients: fit.coefficients,
        intercept: 0.0,
        losses: fit.losses,
        iterations: fit.iterations,
    })
}

/// Inverse-loss weights at one level. Models with zero loss share all the
/// weight equally.
pub fn weights_wa(table: &LossTable, level: usize) -> Vec<f64> {
    let losses = table.level_column(level);
    let zeros = losses.iter().filter(|&&l| l == 0.0).count();
    if zeros > 0 {
        return losses
            .iter()
            .map(|&l| if l == 0.0 { 1.0 / zeros as f64 } else { 0.0 })
            .collect();
    }
    let inv: Vec<f64> = losses.iter().map(|l| 1.0 / l).collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|w| w / total).collect()
}

/// Combined forecast of a fitted model on `panel`, optionally rearranged.
pub fn predict(model: &CombinationModel, panel: &ForecastPanel, rearrange: bool) -> Result<CombinedForecast> {
    check_compatible(model.model_ids(), model.grid(), panel)?;
    let (n, q, t_len) = (panel.n_models(), panel.n_levels(), panel.n_times());
    let mut values = Vec::with_capacity(t_len * q);
    match (model.method(), model.profile()) {
        (MethodTag::Ns, _) => {
            let mut pooled = Vec::with_capacity(n * q);
            for t in 0..t_len {
                pooled.clear();
                pooled.extend_from_slice(panel.all_at(t));
                pooled.sort_by(f64::total_cmp);
                values.extend((0..q).map(|j| pooled[j * n]));
            }
        }
        (MethodTag::Med, _) => {
            let mut column = Vec::with_capacity(n);
            for t in 0..t_len {
                for qi in 0..q {
                    column.clear();
                    column.extend(panel.targeted_at(t, qi));
                    values.push(median(&mut column));
                }
            }
        }
        (_, Some(profile)) => {
            let view = RegressorView::new(panel, profile.regressor_kind);
            let mut row = Vec::with_capacity(view.width());
            for t in 0..t_len {
                for qi in 0..q {
                    row.clear();
                    view.extend_row(t, qi, &mut row);
                    let dot: f64 = row.iter().zip(&profile.per_level[qi]).map(|(a, w)| a * w).sum();
                    values.push(dot + profile.intercept(qi));
                }
            }
        }
        (method, None) => return Err(Error::Internal(format!("{method} model without weights"))),
    }
    if rearrange {
        values = values.chunks_exact(q).flat_map(rearrange_row).collect();
    }
    CombinedForecast::new(panel.time().clone(), panel.grid().clone(), values, rearrange)
}

fn check_compatible(ids: &[String], grid: &QuantileGrid, panel: &ForecastPanel) -> Result<()> {
    if ids != panel.model_ids() {
        return Err(Error::Contract(format!(
            "model fitted on [{}] applied to panel with [{}]",
            ids.join(", "),
            panel.model_ids().join(", ")
        )));
    }
    if grid != panel.grid() {
        return Err(Error::Contract(format!(
            "model fitted on levels {:?} applied to panel with levels {:?}",
            grid.levels(),
            panel.grid().levels()
        )));
    }
    Ok(())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

#[cfg(test)]
mod tests;
