//! Combining probabilistic load forecasts.
//!
//! Given quantile forecasts from several models, this crate estimates
//! per-level combination weights by minimizing pinball loss with a linear
//! program, either on the probability simplex (constrained quantile
//! regression averaging) or unconstrained, and compares the result with
//! simple benchmark combinations.
//!
//! - [`data`]: panels, actuals, grids, weight profiles and fitted models.
//! - [`loss`]: pinball loss and its aggregations.
//! - [`lp`]: the exact simplex solver behind every regression fit.
//! - [`qreg`]: pinball regression programs.
//! - [`combine`]: the combination methods.
//! - [`rearrange`]: repairing quantile crossing.
//! - [`synth`]: synthetic scenarios and base forecasters.
//! - [`io`]: file formats.
//! - [`verify`]: the brute-force two-model oracle.
//! - [`par`]: parallel or sequential execution of independent work.

pub mod combine;
pub mod data;
pub mod error;
pub mod io;
pub mod loss;
pub mod lp;
pub mod par;
pub mod qreg;
pub mod rearrange;
pub mod synth;
pub mod verify;

pub use combine::{fit, predict, FitOptions, MethodTag};
pub use data::{
    align, ActualSeries, AlignedDataset, CombinationModel, CombinedForecast, ForecastPanel, QuantileGrid, TimeIndex,
};
pub use error::{Error, Result};
