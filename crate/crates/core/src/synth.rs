//! Synthetic load scenarios with known quantiles and a pool of linear
//! quantile-regression base forecasters.
//!
//! The load is `m(t) + e_t` with a slowly growing level, a daily shape holding
//! a first and second harmonic, and i.i.d. noise `e_t`. Base models see only a subset of the
//! features (constant, the previous load, and the first harmonic), so each
//! misses part of the signal in a different way.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Laplace as LaplaceCdf, Normal as NormalCdf, StudentsT as StudentsTCdf};

use crate::data::{align, ActualSeries, AlignedDataset, ForecastPanel, QuantileGrid, TimeIndex};
use crate::error::{Error, Result};
use crate::lp::SolverOptions;
use crate::par::{self, Execution};
use crate::qreg::{self, Coefficients, Design};

/// First timestamp of generated series (2013-01-01T00:00:00Z), hourly steps.
pub const DEFAULT_START: i64 = 1_356_998_400;
pub const STEP_SECONDS: i64 = 3600;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Noise {
    Gaussian {
        sigma: f64,
    },
    Laplace {
        b: f64,
    },
    /// Student t with `nu` degrees of freedom, multiplied by `scale`.
    ScaledT {
        nu: f64,
        scale: f64,
    },
}

impl Noise {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Noise::Gaussian { sigma } => sigma > 0.0 && sigma.is_finite(),
            Noise::Laplace { b } => b > 0.0 && b.is_finite(),
            Noise::ScaledT { nu, scale } => nu > 2.0 && nu.is_finite() && scale > 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::parameter("noise", format!("invalid parameters {self:?}")))
        }
    }

    /// Inverse CDF of the noise at `level`.
    pub fn quantile(&self, level: f64) -> f64 {
        match *self {
            Noise::Gaussian { sigma } => NormalCdf::new(0.0, sigma).expect("validated").inverse_cdf(level),
            Noise::Laplace { b } => LaplaceCdf::new(0.0, b).expect("validated").inverse_cdf(level),
            Noise::ScaledT { nu, scale } => StudentsTCdf::new(0.0, scale, nu).expect("validated").inverse_cdf(level),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Noise::Gaussian { sigma } => Normal::new(0.0, sigma).expect("validated").sample(rng),
            Noise::Laplace { b } => {
                let u: f64 = rng.random_range(-0.5..0.5);
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Noise::ScaledT { nu, scale } => scale * StudentT::new(nu).expect("validated").sample(rng),
        }
    }

    fn family(&self) -> &'static str {
        match self {
            Noise::Gaussian { .. } => "gaussian",
            Noise::Laplace { .. } => "laplace",
            Noise::ScaledT { .. } => "scaled_t",
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            Noise::Gaussian { sigma } => vec![sigma],
            Noise::Laplace { b } => vec![b],
            Noise::ScaledT { nu, scale } => vec![nu, scale],
        }
    }

    fn from_parts(family: &str, params: &[f64]) -> Result<Self> {
        let noise = match (family, params) {
            ("gaussian", [sigma]) => Noise::Gaussian { sigma: *sigma },
            ("laplace", [b]) => Noise::Laplace { b: *b },
            ("scaled_t" | "scaled-t" | "student_t" | "t", [nu, scale]) => Noise::ScaledT { nu: *nu, scale: *scale },
            _ => {
                return Err(Error::parameter(
                    "noise",
                    format!("family `{family}` with {} parameters is not recognised", params.len()),
                ))
            }
        };
        noise.validate()?;
        Ok(noise)
    }
}

/// Fractions of the series given to base-model training, validation,
/// combination fitting and testing, in time order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Splits(pub [f64; 4]);

impl Default for Splits {
    fn default() -> Self {
        Splits([0.25; 4])
    }
}

impl Splits {
    fn validate(&self) -> Result<()> {
        let sum: f64 = self.0.iter().sum();
        if self.0.iter().any(|&f| f.is_nan() || f <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::parameter(
                "splits",
                format!("{:?} must be positive and sum to 1", self.0),
            ));
        }
        Ok(())
    }

    /// Index ranges of the four parts for a series of `len` steps.
    pub fn ranges(&self, len: usize) -> [std::ops::Range<usize>; 4] {
        let mut cut = [0usize; 5];
        let mut acc = 0.0;
        for k in 0..4 {
            acc += self.0[k];
            cut[k + 1] = if k == 3 {
                len
            } else {
                (acc * len as f64).round() as usize
            };
        }
        [cut[0]..cut[1], cut[1]..cut[2], cut[2]..cut[3], cut[3]..cut[4]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub seed: u64,
    pub length: usize,
    pub level: f64,
    pub amplitude: f64,
    /// Steps per daily cycle.
    pub period: f64,
    /// Relative level growth per 365 daily cycles.
    pub growth: f64,
    pub noise: Noise,
    pub splits: Splits,
}

impl Default for SyntheticScenario {
    fn default() -> Self {
        SyntheticScenario {
            seed: 0,
            length: 4000,
            level: 1000.0,
            amplitude: 200.0,
            period: 24.0,
            growth: 0.1,
            noise: Noise::Gaussian { sigma: 30.0 },
            splits: Splits::default(),
        }
    }
}

impl SyntheticScenario {
    pub fn with_seed(seed: u64) -> Self {
        SyntheticScenario {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.splits.validate()?;
        if !(self.period >= 2.0 && self.period.is_finite()) {
            return Err(Error::parameter(
                "period",
                format!("{} must be at least 2", self.period),
            ));
        }
        if !self.level.is_finite() || !self.amplitude.is_finite() || !self.growth.is_finite() {
            return Err(Error::parameter("level/amplitude/growth", "must be finite"));
        }
        if self.splits.ranges(self.length).iter().any(|r| r.is_empty()) {
            return Err(Error::parameter(
                "length",
                format!("{} leaves an empty split", self.length),
            ));
        }
        Ok(())
    }

    /// Conditional mean at step `t`.
    pub fn mean(&self, t: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        let trend = self.level * (1.0 + self.growth * t / (365.0 * self.period));
        trend + self.amplitude * ((w * t).sin() + 0.5 * (2.0 * w * t + PI / 4.0).sin())
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys: seed, length,
    /// level, amplitude, period, growth, noise, noise_params, splits. Missing keys keep
    /// their defaults.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut s = SyntheticScenario::default();
        let mut family = s.noise.family().to_string();
        let mut params = s.noise.params();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::parameter("config", format!("line {}: expected `key = value`", i + 1)))?;
            let bad = |what: &str| Error::parameter("config", format!("line {}: invalid {what} `{value}`", i + 1));
            let number = || value.parse::<f64>().map_err(|_| bad(key));
            let list = || -> Result<Vec<f64>> {
                value
                    .split(',')
                    .map(|p| p.trim().parse::<f64>().map_err(|_| bad(key)))
                    .collect()
            };
            match key {
                "seed" => s.seed = value.parse().map_err(|_| bad(key))?,
                "length" => s.length = value.parse().map_err(|_| bad(key))?,
                "level" => s.level = number()?,
                "amplitude" => s.amplitude = number()?,
                "period" => s.period = number()?,
                "growth" => s.growth = number()?,
                "noise" => family = value.to_ascii_lowercase(),
                "noise_params" => params = list()?,
                "splits" => {
                    let v = list()?;
                    s.splits = Splits(v.try_into().map_err(|_| bad("splits (need four fractions)"))?);
                }
                other => {
                    return Err(Error::parameter(
                        "config",
                        format!("line {}: unknown key `{other}`", i + 1),
                    ))
                }
            }
        }
        s.noise = Noise::from_parts(&family, &params)?;
        s.validate()?;
        Ok(s)
    }
}

impl fmt::Display for SyntheticScenario {
    /// The scenario in the key-value config format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "length = {}", self.length)?;
        writeln!(f, "level = {:?}", self.level)?;
        writeln!(f, "amplitude = {:?}", self.amplitude)?;
        writeln!(f, "period = {:?}", self.period)?;
        writeln!(f, "growth = {:?}", self.growth)?;
        writeln!(f, "noise = {}", self.noise.family())?;
        writeln!(f, "noise_params = {}", join(&self.noise.params()))?;
        writeln!(f, "splits = {}", join(&self.splits.0))
    }
}

impl FromStr for SyntheticScenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::from_config(s)
    }
}

/// Regressors available to base models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Constant,
    /// Load at the previous step.
    Lag1,
    /// First harmonic of the daily cycle.
    Sin,
    Cos,
}

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::Constant => "const",
            Feature::Lag1 => "lag1",
            Feature::Sin => "sin",
            Feature::Cos => "cos",
        }
    }
}

/// The three default feature subsets: previous load, daily cycle, and both.
pub fn default_subsets() -> Vec<Vec<Feature>> {
    use Feature::*;
    vec![
        vec![Lag1, Constant],
        vec![Sin, Cos, Constant],
        vec![Lag1, Sin, Cos, Constant],
    ]
}

/// A generated series.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub scenario: SyntheticScenario,
    pub time: TimeIndex,
    pub actuals: Vec<f64>,
    /// Load one step earlier (includes a warm-up draw before the series).
    pub previous: Vec<f64>,
    pub mean: Vec<f64>,
}

impl SyntheticData {
    pub fn feature(&self, feature: Feature, t: usize) -> f64 {
        let w = 2.0 * PI / self.scenario.period;
        match feature {
            Feature::Constant => 1.0,
            Feature::Lag1 => self.previous[t],
            Feature::Sin => (w * t as f64).sin(),
            Feature::Cos => (w * t as f64).cos(),
        }
    }

    pub fn design(&self, features: &[Feature], range: std::ops::Range<usize>) -> Result<Design> {
        let rows = range.len();
        let values = range
            .flat_map(|t| features.iter().map(move |&f| (f, t)))
            .map(|(f, t)| self.feature(f, t))
            .collect();
        Design::new(rows, features.len(), values)
    }

    /// True quantile at step `t` and `level`.
    pub fn true_quantile(&self, t: usize, level: f64) -> f64 {
        self.mean[t] + self.scenario.noise.quantile(level)
    }
}

/// Draws the series of a scenario. Deterministic in the seed.
pub fn generate(scenario: &SyntheticScenario) -> Result<SyntheticData> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let warmup = scenario.mean(-1.0) + scenario.noise.sample(&mut rng);
    let mean: Vec<f64> = (0..scenario.length).map(|t| scenario.mean(t as f64)).collect();
    let actuals: Vec<f64> = mean.iter().map(|m| m + scenario.noise.sample(&mut rng)).collect();
    let mut previous = Vec::with_capacity(scenario.length);
    previous.push(warmup);
    previous.extend_from_slice(&actuals[..scenario.length - 1]);
    Ok(SyntheticData {
        scenario: scenario.clone(),
        time: TimeIndex::regular(DEFAULT_START, STEP_SECONDS, scenario.length)?,
        actuals,
        previous,
        mean,
    })
}

/// Per-level linear quantile regression on a fixed feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearQuantileModel {
    pub features: Vec<Feature>,
    pub grid: QuantileGrid,
    /// One coefficient vector per level, aligned with `features`.
    pub coefficients: Vec<Vec<f64>>,
}

impl LinearQuantileModel {
    /// Predictions for every design row, time-major, level-minor.
    pub fn predict(&self, design: &Design) -> Vec<f64> {
        let mut out = Vec::with_capacity(design.n_rows() * self.grid.len());
        for i in 0..design.n_rows() {
            let x = design.row(i);
            for beta in &self.coefficients {
                out.push(x.iter().zip(beta).map(|(a, b)| a * b).sum());
            }
        }
        out
    }
}

/// Fits one free-coefficient pinball regression per level.
pub fn fit_base(
    design: &Design,
    actuals: &[f64],
    grid: &QuantileGrid,
    features: &[Feature],
    solver: &SolverOptions,
) -> Result<LinearQuantileModel> {
    if design.n_cols() != features.len() {
        return Err(Error::invalid(
            "base model",
            "design width differs from the feature list",
        ));
    }
    if design.n_rows() < design.n_cols() {
        return Err(Error::parameter(
            "design",
            format!("{} rows for {} features", design.n_rows(), design.n_cols()),
        ));
    }
    let coefficients = grid
        .levels()
        .iter()
        .map(|&q| {
            let levels = vec![q; design.n_rows()];
            qreg::fit(
                design,
                actuals,
                &levels,
                Coefficients::Free { intercept: false },
                solver,
            )
            .map(|f| f.coefficients)
        })
        .collect::<Result<_>>()?;
    Ok(LinearQuantileModel {
        features: features.to_vec(),
        grid: grid.clone(),
        coefficients,
    })
}

/// A base-model pool evaluated over the combination and test spans.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub data: SyntheticData,
    pub models: Vec<LinearQuantileModel>,
    /// Pool forecasts and actuals over the combination span followed by the
    /// test span.
    pub pool: AlignedDataset,
    /// True quantiles over the same span, as a single-model panel.
    pub oracle: ForecastPanel,
    /// Steps of `pool` belonging to the combination span.
    pub fit_len: usize,
}

impl Experiment {
    /// Combination-fit part and test part of the pool.
    pub fn split(&self) -> Result<(AlignedDataset, AlignedDataset)> {
        let total = self.pool.len();
        Ok((
            self.pool.slice_time(0..self.fit_len)?,
            self.pool.slice_time(self.fit_len..total)?,
        ))
    }

    /// Fraction of the pool that `split_by_ratio` maps to the fit span.
    pub fn fit_fraction(&self) -> f64 {
        self.fit_len as f64 / self.pool.len() as f64
    }
}

/// Generates the scenario, trains one base model per feature subset on the
/// training span, and forecasts the combination and test spans.
pub fn make_pool(
    scenario: &SyntheticScenario,
    subsets: &[Vec<Feature>],
    grid: &QuantileGrid,
    solver: &SolverOptions,
    execution: Execution,
) -> Result<Experiment> {
    if subsets.is_empty() {
        return Err(Error::parameter("subsets", "at least one feature subset is required"));
    }
    let data = generate(scenario)?;
    let [train, _validate, combine, test] = scenario.splits.ranges(scenario.length);
    let span = combine.start..test.end;
    let models = par::try_map(execution, subsets.to_vec(), |features| {
        let design = data.design(&features, train.clone())?;
        fit_base(&design, &data.actuals[train.clone()], grid, &features, solver)
    })?;
    let forecasts: Vec<Vec<f64>> = models
        .iter()
        .map(|m| Ok(m.predict(&data.design(&m.features, span.clone())?)))
        .collect::<Result<_>>()?;
    let time = TimeIndex::new(data.time.stamps()[span.clone()].to_vec())?;
    let ids: Vec<String> = (1..=models.len()).map(|k| format!("lr{k}")).collect();
    let q = grid.len();
    let panel = ForecastPanel::from_fn(ids, time.clone(), grid.clone(), |n, t, qi| forecasts[n][t * q + qi])?;
    let oracle = ForecastPanel::from_fn(vec!["truth".into()], time.clone(), grid.clone(), |_, t, qi| {
        data.true_quantile(span.start + t, grid.level(qi))
    })?;
    let pool = align(panel, ActualSeries::new(time, data.actuals[span].to_vec())?)?;
    Ok(Experiment {
        fit_len: combine.len(),
        data,
        models,
        pool,
        oracle,
    })
}
