//! Pinball (check) loss and its aggregations.
//!
//! The same scoring function drives both weight estimation and evaluation.

use serde::{Deserialize, Serialize};

use crate::data::{align, ActualSeries, CombinedForecast, ForecastPanel};
use crate::error::{Error, Result};

/// Pinball loss of quantile forecast `y_hat` at `level` against outcome `y`.
///
/// Over-forecasts cost `(1 - level)` per unit, under-forecasts `level` per
/// unit. Callers are responsible for `level` lying in (0, 1); see
/// [`pinball_checked`].
#[inline]
pub fn pinball(y_hat: f64, y: f64, level: f64) -> f64 {
    if y_hat >= y {
        let d = y_hat - y;
        d - level * d
    } else {
        level * (y - y_hat)
    }
}

pub fn pinball_checked(y_hat: f64, y: f64, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::parameter("level", format!("{level} is outside (0, 1)")));
    }
    if !y_hat.is_finite() || !y.is_finite() {
        return Err(Error::parameter("y_hat/y", "inputs must be finite"));
    }
    Ok(pinball(y_hat, y, level))
}

/// Mean pinball loss per (model, level) over a time range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTable {
    model_ids: Vec<String>,
    levels: Vec<f64>,
    /// Row-major N×Q.
    entries: Vec<f64>,
}

impl LossTable {
    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn get(&self, model: usize, level: usize) -> f64 {
        self.entries[model * self.levels.len() + level]
    }

    /// Column `level`: every model's mean loss at that level.
    pub fn level_column(&self, level: usize) -> Vec<f64> {
        (0..self.n_models()).map(|n| self.get(n, level)).collect()
    }

    /// Mean over levels for one model (equal to its overall pinball score).
    pub fn model_mean(&self, model: usize) -> f64 {
        let q = self.levels.len();
        self.entries[model * q..(model + 1) * q].iter().sum::<f64>() / q as f64
    }

    /// Index of the model with the smallest overall mean, lowest index on ties.
    pub fn best_model(&self) -> usize {
        argmin((0..self.n_models()).map(|n| self.model_mean(n)))
    }

    /// Best model at one level, lowest index on ties.
    pub fn best_model_at(&self, level: usize) -> usize {
        argmin((0..self.n_models()).map(|n| self.get(n, level)))
    }
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Per-model, per-level mean pinball loss of a panel against actuals.
pub fn loss_table(panel: &ForecastPanel, actuals: &ActualSeries) -> Result<LossTable> {
    let ds = align(panel.clone(), actuals.clone())?;
    let (panel, actuals) = (ds.panel(), ds.actuals());
    let (n, q) = (panel.n_models(), panel.n_levels());
    let levels = panel.grid().levels();
    let mut sums = vec![0.0; n * q];
    for (t, &y) in actuals.values().iter().enumerate() {
        for (i, &y_hat) in panel.all_at(t).iter().enumerate() {
            sums[i] += pinball(y_hat, y, levels[i % q]);
        }
    }
    let len = actuals.len() as f64;
    Ok(LossTable {
        model_ids: panel.model_ids().to_vec(),
        levels: levels.to_vec(),
        entries: sums.into_iter().map(|s| s / len).collect(),
    })
}

/// Mean pinball loss over every (time, level) cell of a combined forecast.
pub fn pinball_score(combined: &CombinedForecast, actuals: &ActualSeries) -> Result<f64> {
    let per_level = level_scores(combined, actuals)?;
    Ok(per_level.iter().sum::<f64>() / per_level.len() as f64)
}

/// Mean pinball loss of a combined forecast at each level.
pub fn level_scores(combined: &CombinedForecast, actuals: &ActualSeries) -> Result<Vec<f64>> {
    if let Some(index) = combined.time().first_mismatch(actuals.time()) {
        return Err(Error::Alignment {
            index,
            reason: "combined forecast and actuals disagree".into(),
        });
    }
    let levels = combined.grid().levels();
    let mut sums = vec![0.0; levels.len()];
    for (row, &y) in combined.rows().zip(actuals.values()) {
        for ((s, &y_hat), &level) in sums.iter_mut().zip(row).zip(levels) {
            *s += pinball(y_hat, y, level);
        }
    }
    let len = actuals.len() as f64;
    Ok(sums.into_iter().map(|s| s / len).collect())
}

/// Mean pinball loss of one quantile path.
pub fn mean_pinball(forecasts: &[f64], actuals: &[f64], level: f64) -> f64 {
    debug_assert_eq!(forecasts.len(), actuals.len());
    forecasts
        .iter()
        .zip(actuals)
        .map(|(&f, &y)| pinball(f, y, level))
        .sum::<f64>()
        / actuals.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{QuantileGrid, TimeIndex};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pinball_examples() {
        assert_eq!(pinball(100.0, 100.0, 0.9), 0.0);
        assert_eq!(pinball(110.0, 100.0, 0.9), 1.0);
        assert_eq!(pinball(95.0, 100.0, 0.5), 2.5);
        assert_eq!(pinball(105.0, 100.0, 0.5), 2.5);
    }

    #[test]
    fn checked_rejects_bad_level() {
        assert!(pinball_checked(1.0, 1.0, 0.0).is_err());
        assert!(pinball_checked(1.0, 1.0, 1.0).is_err());
        assert!(pinball_checked(1.0, f64::NAN, 0.5).is_err());
        assert_eq!(pinball_checked(3.0, 1.0, 0.25).unwrap(), 1.5);
    }

    fn single_level(forecasts: &[f64], actuals: &[f64], level: f64) -> (ForecastPanel, ActualSeries) {
        let time = TimeIndex::regular(0, 1, actuals.len()).unwrap();
        let grid = QuantileGrid::new(vec![level]).unwrap();
        let panel = ForecastPanel::from_fn(vec!["m".into()], time.clone(), grid, |_, t, _| forecasts[t]).unwrap();
        (panel, ActualSeries::new(time, actuals.to_vec()).unwrap())
    }

    #[test]
    fn loss_table_hand_example() {
        let (panel, actuals) = single_level(&[10.0, 10.0], &[12.0, 8.0], 0.5);
        let table = loss_table(&panel, &actuals).unwrap();
        assert_eq!(table.get(0, 0), 1.0);
    }

    #[test]
    fn loss_table_perfect_model_row_is_zero() {
        let time = TimeIndex::regular(0, 60, 4).unwrap();
        let y = vec![3.0, 1.0, 4.0, 1.5];
        let actuals = ActualSeries::new(time.clone(), y.clone()).unwrap();
        let panel = ForecastPanel::from_fn(
            vec!["exact".into(), "off".into()],
            time,
            QuantileGrid::deciles(),
            |n, t, _| y[t] + n as f64,
        )
        .unwrap();
        let table = loss_table(&panel, &actuals).unwrap();
        assert!((0..9).all(|q| table.get(0, q) == 0.0));
        assert!((0..9).all(|q| table.get(1, q) > 0.0));
        assert_eq!(table.best_model(), 0);
    }

    #[test]
    fn loss_table_scales_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..10.0)).collect();
        let (p, a) = single_level(&f, &y, 0.3);
        let (p2, a2) = (p.map_values(|v| 2.0 * v).unwrap(), a.map_values(|v| 2.0 * v).unwrap());
        let base = loss_table(&p, &a).unwrap().get(0, 0);
        let doubled = loss_table(&p2, &a2).unwrap().get(0, 0);
        assert!((doubled - 2.0 * base).abs() < 1e-12);
    }

    #[test]
    fn loss_table_rejects_misalignment() {
        let (panel, _) = single_level(&[1.0, 2.0], &[1.0, 2.0], 0.5);
        let other = ActualSeries::new(TimeIndex::regular(1, 1, 2).unwrap(), vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            loss_table(&panel, &other),
            Err(Error::Alignment { index: 0, .. })
        ));
    }

    #[test]
    fn score_examples() {
        let time = TimeIndex::new(vec![0]).unwrap();
        let grid = QuantileGrid::new(vec![0.25, 0.75]).unwrap();
        let actuals = ActualSeries::new(time.clone(), vec![10.0]).unwrap();
        let c = CombinedForecast::new(time.clone(), grid.clone(), vec![9.0, 11.0], false).unwrap();
        assert!((pinball_score(&c, &actuals).unwrap() - 0.25).abs() < 1e-15);
        let exact = CombinedForecast::new(time, grid, vec![10.0, 10.0], true).unwrap();
        assert_eq!(pinball_score(&exact, &actuals).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn non_negative_and_zero_only_at_truth(a in -1e4..1e4f64, y in -1e4..1e4f64, q in 0.001..0.999f64) {
            let l = pinball(a, y, q);
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, a == y);
        }

        #[test]
        fn positively_homogeneous(a in -1e3..1e3f64, y in -1e3..1e3f64, q in 0.001..0.999f64, c in 0.01..100.0f64) {
            let lhs = pinball(c * a, c * y, q);
            let rhs = c * pinball(a, y, q);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn convex_in_forecast(a in -1e3..1e3f64, b in -1e3..1e3f64, y in -1e3..1e3f64,
                              q in 0.001..0.999f64, lam in 0.0..=1.0f64) {
            let mix = pinball(lam * a + (1.0 - lam) * b, y, q);
            let bound = lam * pinball(a, y, q) + (1.0 - lam) * pinball(b, y, q);
            prop_assert!(mix <= bound + 1e-9 * (1.0 + bound));
        }

        #[test]
        fn score_is_mean_of_cells(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t_len = rng.random_range(1..30usize);
            let grid = QuantileGrid::new(vec![0.05, 0.4, 0.6, 0.95]).unwrap();
            let time = TimeIndex::regular(0, 1, t_len).unwrap();
            let values: Vec<f64> = (0..t_len * 4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..t_len).map(|_| rng.random_range(-5.0..5.0)).collect();
            let c = CombinedForecast::new(time.clone(), grid.clone(), values.clone(), false).unwrap();
            let a = ActualSeries::new(time, y.clone()).unwrap();
            let mut cells = Vec::new();
            for t in 0..t_len {
                for (qi, &level) in grid.levels().iter().enumerate() {
                    cells.push(pinball(values[t * 4 + qi], y[t], level));
                }
            }
            let brute = cells.iter().sum::<f64>() / cells.len() as f64;
            prop_assert!((pinball_score(&c, &a).unwrap() - brute).abs() < 1e-12);
        }
    }
}
