//! Domain data model: quantile grids, time indices, forecast panels, actuals,
//! weight profiles, combined forecasts and fitted combination models.
//!
//! Every type validates its invariants at construction (including when it is
//! deserialized) and is immutable afterwards.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::combine::MethodTag;
use crate::error::{Error, Result};

/// Ordered set of quantile levels, each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileGrid {
    levels: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("quantile grid", "no levels"));
        }
        for (i, &level) in levels.iter().enumerate() {
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::invalid(
                    "quantile grid",
                    format!("level {level} at position {i} is outside (0, 1)"),
                ));
            }
            if i > 0 && level <= levels[i - 1] {
                return Err(Error::invalid(
                    "quantile grid",
                    format!("levels must strictly increase ({} then {level})", levels[i - 1]),
                ));
            }
        }
        Ok(QuantileGrid { levels })
    }

    /// The nine deciles 0.1, 0.2, ..., 0.9.
    pub fn deciles() -> Self {
        QuantileGrid {
            levels: (1..=9).map(|k| k as f64 / 10.0).collect(),
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, index: usize) -> f64 {
        self.levels[index]
    }

    /// Position of `level` in the grid, matching to within 1e-12.
    pub fn index_of(&self, level: f64) -> Option<usize> {
        self.levels.iter().position(|&l| (l - level).abs() <= 1e-12)
    }
}

impl Default for QuantileGrid {
    fn default() -> Self {
        Self::deciles()
    }
}

impl TryFrom<Vec<f64>> for QuantileGrid {
    type Error = Error;
    fn try_from(levels: Vec<f64>) -> Result<Self> {
        QuantileGrid::new(levels)
    }
}

impl From<QuantileGrid> for Vec<f64> {
    fn from(grid: QuantileGrid) -> Self {
        grid.levels
    }
}

/// Strictly increasing timestamps in epoch seconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct TimeIndex {
    stamps: Vec<i64>,
}

impl TimeIndex {
    pub fn new(stamps: Vec<i64>) -> Result<Self> {
        if stamps.is_empty() {
            return Err(Error::invalid("time index", "no timestamps"));
        }
        if let Some(i) = stamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "time index",
                format!("timestamps must strictly increase (position {})", i + 1),
            ));
        }
        Ok(TimeIndex { stamps })
    }

    /// `len` stamps starting at `start`, `step` seconds apart.
    pub fn regular(start: i64, step: i64, len: usize) -> Result<Self> {
        if step <= 0 {
            return Err(Error::parameter("step", "must be positive"));
        }
        Self::new((0..len as i64).map(|k| start + k * step).collect())
    }

    pub fn stamps(&self) -> &[i64] {
        &self.stamps
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    fn slice(&self, range: Range<usize>) -> TimeIndex {
        TimeIndex {
            stamps: self.stamps[range].to_vec(),
        }
    }

    /// First position at which two indices disagree, if any.
    pub fn first_mismatch(&self, other: &TimeIndex) -> Option<usize> {
        let common = self.len().min(other.len());
        (0..common)
            .find(|&i| self.stamps[i] != other.stamps[i])
            .or_else(|| (self.len() != other.len()).then_some(common))
    }
}

impl TryFrom<Vec<i64>> for TimeIndex {
    type Error = Error;
    fn try_from(stamps: Vec<i64>) -> Result<Self> {
        TimeIndex::new(stamps)
    }
}

impl From<TimeIndex> for Vec<i64> {
    fn from(index: TimeIndex) -> Self {
        index.stamps
    }
}

fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::invalid(what, format!("non-finite value at flat position {i}"))),
        None => Ok(()),
    }
}

/// Quantile forecasts of N models over T times and Q levels.
///
/// Values are stored time-major: for each time step the N×Q block lists
/// model 0's quantiles in grid order, then model 1's, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPanel")]
pub struct ForecastPanel {
    model_ids: Vec<String>,
    time: TimeIndex,
    grid: QuantileGrid,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPanel {
    model_ids: Vec<String>,
    time: TimeIndex,
    grid: QuantileGrid,
    values: Vec<f64>,
}

impl TryFrom<RawPanel> for ForecastPanel {
    type Error = Error;
    fn try_from(raw: RawPanel) -> Result<Self> {
        ForecastPanel::new(raw.model_ids, raw.time, raw.grid, raw.values)
    }
}

impl ForecastPanel {
    pub fn new(model_ids: Vec<String>, time: TimeIndex, grid: QuantileGrid, values: Vec<f64>) -> Result<Self> {
        if model_ids.is_empty() {
            return Err(Error::invalid("forecast panel", "no models"));
        }
        let mut seen = HashSet::new();
        for id in &model_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid("forecast panel", format!("duplicate model id `{id}`")));
            }
        }
        let expected = model_ids.len() * time.len() * grid.len();
        if values.len() != expected {
            return Err(Error::invalid(
                "forecast panel",
                format!("expected {expected} values (N×T×Q), found {}", values.len()),
            ));
        }
        check_finite("forecast panel", &values)?;
        Ok(ForecastPanel {
            model_ids,
            time,
            grid,
            values,
        })
    }

    /// Builds a panel from `f(model, time, level_index)`.
    pub fn from_fn(
        model_ids: Vec<String>,
        time: TimeIndex,
        grid: QuantileGrid,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let (n, t, q) = (model_ids.len(), time.len(), grid.len());
        let mut values = Vec::with_capacity(n * t * q);
        for ti in 0..t {
            for ni in 0..n {
                for qi in 0..q {
                    values.push(f(ni, ti, qi));
                }
            }
        }
        Self::new(model_ids, time, grid, values)
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn time(&self) -> &TimeIndex {
        &self.time
    }

    pub fn grid(&self) -> &QuantileGrid {
        &self.grid
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn n_times(&self) -> usize {
        self.time.len()
    }

    pub fn n_levels(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn value(&self, model: usize, time: usize, level: usize) -> f64 {
        let (n, q) = (self.n_models(), self.n_levels());
        self.values[(time * n + model) * q + level]
    }

    /// All N×Q quantiles at one time step, model-major.
    pub fn all_at(&self, time: usize) -> &[f64] {
        let block = self.n_models() * self.n_levels();
        &self.values[time * block..(time + 1) * block]
    }

    /// The N models' forecasts of one level at one time step.
    pub fn targeted_at(&self, time: usize, level: usize) -> impl Iterator<Item = f64> + '_ {
        self.all_at(time)[level..].iter().step_by(self.n_levels()).copied()
    }

    /// Each model's mean over its Q quantiles at one time step.
    pub fn averaged_at(&self, time: usize) -> Vec<f64> {
        let q = self.n_levels();
        self.all_at(time)
            .chunks_exact(q)
            .map(|c| c.iter().sum::<f64>() / q as f64)
            .collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice_time(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.n_times() {
            return Err(Error::parameter(
                "range",
                format!("{range:?} is empty or exceeds {} time steps", self.n_times()),
            ));
        }
        let block = self.n_models() * self.n_levels();
        Ok(ForecastPanel {
            model_ids: self.model_ids.clone(),
            time: self.time.slice(range.clone()),
            grid: self.grid.clone(),
            values: self.values[range.start * block..range.end * block].to_vec(),
        })
    }

    /// Same panel with every value passed through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::new(self.model_ids.clone(), self.time.clone(), self.grid.clone(), values)
    }

    /// Whether both panels have the same models, time index and grid.
    pub fn same_layout(&self, other: &ForecastPanel) -> bool {
        self.model_ids == other.model_ids && self.time == other.time && self.grid == other.grid
    }
}

/// Observed loads aligned to a time index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawActuals")]
pub struct ActualSeries {
    time: TimeIndex,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawActuals {
    time: TimeIndex,
    values: Vec<f64>,
}

impl TryFrom<RawActuals> for ActualSeries {
    type Error = Error;
    fn try_from(raw: RawActuals) -> Result<Self> {
        ActualSeries::new(raw.time, raw.values)
    }
}

impl ActualSeries {
    pub fn new(time: TimeIndex, values: Vec<f64>) -> Result<Self> {
        if values.len() != time.len() {
            return Err(Error::invalid(
                "actual series",
                format!("{} values for {} timestamps", values.len(), time.len()),
            ));
        }
        check_finite("actual series", &values)?;
        Ok(ActualSeries { time, values })
    }

    pub fn time(&self) -> &TimeIndex {
        &self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice_time(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::parameter(
                "range",
                format!("{range:?} is empty or exceeds {} time steps", self.len()),
            ));
        }
        Ok(ActualSeries {
            time: self.time.slice(range.clone()),
            values: self.values[range].to_vec(),
        })
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.time.clone(), self.values.iter().map(|&v| f(v)).collect())
    }
}

/// A panel and actuals verified to share one time index.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    panel: ForecastPanel,
    actuals: ActualSeries,
}

/// Pairs a panel with its actuals; timestamps must match exactly.
pub fn align(panel: ForecastPanel, actuals: ActualSeries) -> Result<AlignedDataset> {
    if let Some(index) = panel.time().first_mismatch(actuals.time()) {
        let reason = if index >= panel.n_times().min(actuals.len()) {
            format!(
                "panel has {} time steps, actuals have {}",
                panel.n_times(),
                actuals.len()
            )
        } else {
            format!(
                "panel stamp {} vs actuals stamp {}",
                panel.time().stamps()[index],
                actuals.time().stamps()[index]
            )
        };
        return Err(Error::Alignment { index, reason });
    }
    Ok(AlignedDataset { panel, actuals })
}

impl AlignedDataset {
    pub fn panel(&self) -> &ForecastPanel {
        &self.panel
    }

    pub fn actuals(&self) -> &ActualSeries {
        &self.actuals
    }

    pub fn len(&self) -> usize {
        self.actuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actuals.is_empty()
    }

    pub fn into_parts(self) -> (ForecastPanel, ActualSeries) {
        (self.panel, self.actuals)
    }

    pub fn slice_time(&self, range: Range<usize>) -> Result<Self> {
        Ok(AlignedDataset {
            panel: self.panel.slice_time(range.clone())?,
            actuals: self.actuals.slice_time(range)?,
        })
    }

    /// Splits into a chronological prefix of `ceil(fit_fraction * T)` steps
    /// and the remainder.
    pub fn split_by_ratio(&self, fit_fraction: f64) -> Result<(Self, Self)> {
        split_by_ratio(self, fit_fraction)
    }
}

pub fn split_by_ratio(dataset: &AlignedDataset, fit_fraction: f64) -> Result<(AlignedDataset, AlignedDataset)> {
    if !(fit_fraction > 0.0 && fit_fraction < 1.0) {
        return Err(Error::parameter(
            "fit_fraction",
            format!("{fit_fraction} is outside (0, 1)"),
        ));
    }
    let total = dataset.len();
    let fit_len = (fit_fraction * total as f64).ceil() as usize;
    if fit_len == 0 || fit_len >= total {
        return Err(Error::parameter(
            "fit_fraction",
            format!(
                "{fit_fraction} of {total} steps leaves an empty part ({fit_len}/{})",
                total.saturating_sub(fit_len)
            ),
        ));
    }
    Ok((dataset.slice_time(0..fit_len)?, dataset.slice_time(fit_len..total)?))
}

/// Which regressors a weight vector applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    /// The N models' forecasts of the level being combined.
    Targeted,
    /// All N×Q quantiles, model-major.
    All,
    /// Each model's mean over its Q quantiles.
    Averaged,
}

impl RegressorKind {
    pub fn width(self, n_models: usize, n_levels: usize) -> usize {
        match self {
            RegressorKind::Targeted | RegressorKind::Averaged => n_models,
            RegressorKind::All => n_models * n_levels,
        }
    }
}

/// Tolerances for the simplex constraint on constrained profiles.
pub const WEIGHT_NONNEG_TOL: f64 = 1e-9;
pub const WEIGHT_SUM_TOL: f64 = 1e-8;

/// Per-level coefficient vectors, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub method: MethodTag,
    pub regressor_kind: RegressorKind,
    pub constrained: bool,
    pub per_level: Vec<Vec<f64>>,
    pub intercept_per_level: Option<Vec<f64>>,
}

impl WeightProfile {
    /// Checks the profile against a panel shape of `n_models` × `n_levels`.
    pub fn validate(&self, n_models: usize, n_levels: usize) -> Result<()> {
        if self.per_level.len() != n_levels {
            return Err(Error::invalid(
                "weight profile",
                format!("{} coefficient vectors for {n_levels} levels", self.per_level.len()),
            ));
        }
        let width = self.regressor_kind.width(n_models, n_levels);
        for (qi, coefs) in self.per_level.iter().enumerate() {
            if coefs.len() != width {
                return Err(Error::invalid(
                    "weight profile",
                    format!("level {qi}: {} coefficients, expected {width}", coefs.len()),
                ));
            }
            check_finite("weight profile", coefs)?;
            if self.constrained {
                if let Some(i) = coefs.iter().position(|&w| w < -WEIGHT_NONNEG_TOL) {
                    return Err(Error::invalid(
                        "weight profile",
                        format!("level {qi}: weight {i} is negative ({})", coefs[i]),
                    ));
                }
                let sum: f64 = coefs.iter().sum();
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::invalid(
                        "weight profile",
                        format!("level {qi}: weights sum to {sum}, not 1"),
                    ));
                }
            }
        }
        if let Some(intercepts) = &self.intercept_per_level {
            if self.constrained {
                return Err(Error::invalid("weight profile", "constrained profile has intercepts"));
            }
            if intercepts.len() != n_levels {
                return Err(Error::invalid(
                    "weight profile",
                    format!("{} intercepts for {n_levels} levels", intercepts.len()),
                ));
            }
            check_finite("weight profile", intercepts)?;
        }
        Ok(())
    }

    pub fn intercept(&self, level: usize) -> f64 {
        self.intercept_per_level.as_ref().map_or(0.0, |b| b[level])
    }
}

/// Combined quantiles, T×Q, time-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedForecast {
    time: TimeIndex,
    grid: QuantileGrid,
    values: Vec<f64>,
    rearranged: bool,
}

impl CombinedForecast {
    pub fn new(time: TimeIndex, grid: QuantileGrid, values: Vec<f64>, rearranged: bool) -> Result<Self> {
        if values.len() != time.len() * grid.len() {
            return Err(Error::invalid(
                "combined forecast",
                format!(
                    "expected {} values (T×Q), found {}",
                    time.len() * grid.len(),
                    values.len()
                ),
            ));
        }
        check_finite("combined forecast", &values)?;
        if rearranged {
            for (t, row) in values.chunks_exact(grid.len()).enumerate() {
                if row.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::invalid(
                        "combined forecast",
                        format!("flagged as rearranged but decreasing at time {t}"),
                    ));
                }
            }
        }
        Ok(CombinedForecast {
            time,
            grid,
            values,
            rearranged,
        })
    }

    pub fn time(&self) -> &TimeIndex {
        &self.time
    }

    pub fn grid(&self) -> &QuantileGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_rearranged(&self) -> bool {
        self.rearranged
    }

    pub fn n_times(&self) -> usize {
        self.time.len()
    }

    pub fn row(&self, time: usize) -> &[f64] {
        let q = self.grid.len();
        &self.values[time * q..(time + 1) * q]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.grid.len())
    }

    pub fn value(&self, time: usize, level: usize) -> f64 {
        self.values[time * self.grid.len() + level]
    }
}

/// In-sample fit summary, one entry per grid level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Mean pinball loss of the unrearranged combination on the fit set.
    pub in_sample: Vec<f64>,
    /// Simplex iterations spent per level (zero for closed-form methods).
    pub iterations: Vec<usize>,
    /// Number of time steps in the fit set.
    pub fit_len: usize,
}

/// A fitted combination method, ready to predict on panels with the same
/// models and grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationModel {
    method: MethodTag,
    model_ids: Vec<String>,
    grid: QuantileGrid,
    profile: Option<WeightProfile>,
    diagnostics: FitDiagnostics,
}

impl CombinationModel {
    pub fn new(
        method: MethodTag,
        model_ids: Vec<String>,
        grid: QuantileGrid,
        profile: Option<WeightProfile>,
        diagnostics: FitDiagnostics,
    ) -> Result<Self> {
        match (&profile, method.needs_profile()) {
            (Some(p), true) => {
                if p.method != method {
                    return Err(Error::invalid(
                        "combination model",
                        format!("model tagged {method} carries a {} profile", p.method),
                    ));
                }
                p.validate(model_ids.len(), grid.len())?;
            }
            (None, false) => {}
            (Some(_), false) => {
                return Err(Error::invalid(
                    "combination model",
                    format!("{method} takes no weights"),
                ))
            }
            (None, true) => {
                return Err(Error::invalid(
                    "combination model",
                    format!("{method} requires weights"),
                ))
            }
        }
        Ok(CombinationModel {
            method,
            model_ids,
            grid,
            profile,
            diagnostics,
        })
    }

    pub fn method(&self) -> MethodTag {
        self.method
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn grid(&self) -> &QuantileGrid {
        &self.grid
    }

    pub fn profile(&self) -> Option<&WeightProfile> {
        self.profile.as_ref()
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }
}
