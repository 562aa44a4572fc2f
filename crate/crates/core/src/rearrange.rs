//! Naive rearrangement of crossing quantiles.

use crate::data::CombinedForecast;
use crate::error::Result;

/// The row's values sorted ascending (stable).
pub fn rearrange_row(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    out.sort_by(f64::total_cmp);
    out
}

/// Number of time steps with at least one decreasing adjacent pair.
pub fn crossing_count(forecast: &CombinedForecast) -> usize {
    forecast
        .rows()
        .filter(|row| row.windows(2).any(|w| w[1] < w[0]))
        .count()
}

/// Sorts every row and marks the forecast as rearranged.
pub fn rearrange(forecast: &CombinedForecast) -> Result<CombinedForecast> {
    let values: Vec<f64> = forecast.rows().flat_map(rearrange_row).collect();
    CombinedForecast::new(forecast.time().clone(), forecast.grid().clone(), values, true)
}
