//! File formats: long-format forecast CSV, actuals CSV, JSON weight files and
//! score reports.
//!
//! Readers never fill or drop data: every malformation is reported with the
//! offending line. Writers emit values in Rust's shortest round-trip decimal
//! form, so a write/read cycle reproduces every `f64` bit for bit.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::combine::MethodTag;
use crate::data::{
    ActualSeries, CombinationModel, CombinedForecast, FitDiagnostics, ForecastPanel, QuantileGrid, RegressorKind,
    TimeIndex, WeightProfile,
};
use crate::error::{Error, IngestError, Result};

pub const FORECAST_HEADER: [&str; 4] = ["model", "timestamp", "level", "value"];
pub const ACTUALS_HEADER: [&str; 2] = ["timestamp", "value"];
pub const WEIGHTS_SCHEMA_VERSION: u32 = 1;

/// Parses an epoch-seconds integer or an ISO-8601 UTC instant.
pub fn parse_timestamp(text: &str) -> Option<i64> {
    let s = text.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Reads records, checking the header and the field count of every row.
/// Yields `(line, record)` for data rows.
fn records<R: Read>(input: R, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = reader(input);
    let mut out = Vec::new();
    let mut seen_header = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Ingest(IngestError::Malformed {
                line,
                reason: e.to_string(),
            })
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if !seen_header {
            let found: Vec<&str> = rec.iter().collect();
            if found != header {
                return Err(IngestError::Header {
                    line,
                    expected: header.join(","),
                    found: found.join(","),
                }
                .into());
            }
            seen_header = true;
            continue;
        }
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != header.len() {
            return Err(IngestError::FieldCount {
                line,
                expected: header.len(),
                found: rec.len(),
            }
            .into());
        }
        out.push((line, rec));
    }
    if !seen_header {
        return Err(IngestError::Header {
            line: 1,
            expected: header.join(","),
            found: String::new(),
        }
        .into());
    }
    if out.is_empty() {
        return Err(IngestError::Empty.into());
    }
    Ok(out)
}

fn number(line: usize, field: &'static str, text: &str) -> Result<f64> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IngestError::NotNumeric {
            line,
            field,
            value: text.to_string(),
        }
        .into()),
    }
}

fn timestamp(line: usize, text: &str) -> Result<i64> {
    parse_timestamp(text).ok_or_else(|| {
        IngestError::Timestamp {
            line,
            value: text.to_string(),
        }
        .into()
    })
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

pub fn read_forecasts(path: impl AsRef<Path>) -> Result<ForecastPanel> {
    parse_forecasts(open(path.as_ref())?)
}

/// Parses a long-format forecast table. Models keep their order of first
/// appearance; timestamps and levels are sorted.
pub fn parse_forecasts<R: Read>(input: R) -> Result<ForecastPanel> {
    let rows = records(input, &FORECAST_HEADER)?;
    let mut models: Vec<String> = Vec::new();
    let mut model_index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, i64, u64), (f64, usize)> = HashMap::new();
    let mut stamps = Vec::new();
    let mut levels = Vec::new();
    for (line, rec) in &rows {
        let line = *line;
        let model = rec[0].to_string();
        if model.is_empty() {
            return Err(IngestError::Malformed {
                line,
                reason: "empty model id".into(),
            }
            .into());
        }
        let ts = timestamp(line, &rec[1])?;
        let level = number(line, "level", &rec[2])?;
        if !(level > 0.0 && level < 1.0) {
            return Err(IngestError::Malformed {
                line,
                reason: format!("level {level} is outside (0, 1)"),
            }
            .into());
        }
        let value = number(line, "value", &rec[3])?;
        let next = models.len();
        let m = *model_index.entry(model.clone()).or_insert_with(|| {
            models.push(model.clone());
            next
        });
        if let Some(&(_, first_line)) = cells.get(&(m, ts, level.to_bits())) {
            return Err(IngestError::Duplicate {
                line,
                first_line,
                model,
                timestamp: ts,
                level,
            }
            .into());
        }
        cells.insert((m, ts, level.to_bits()), (value, line));
        stamps.push(ts);
        levels.push(level);
    }
    stamps.sort_unstable();
    stamps.dedup();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let time = TimeIndex::new(stamps)?;
    let grid = QuantileGrid::new(levels)?;
    let mut values = Vec::with_capacity(models.len() * time.len() * grid.len());
    for &ts in time.stamps() {
        for (m, id) in models.iter().enumerate() {
            for &level in grid.levels() {
                match cells.get(&(m, ts, level.to_bits())) {
                    Some(&(v, _)) => values.push(v),
                    None => {
                        return Err(IngestError::MissingCell {
                            model: id.clone(),
                            timestamp: ts,
                            level,
                        }
                        .into())
                    }
                }
            }
        }
    }
    ForecastPanel::new(models, time, grid, values)
}

pub fn read_actuals(path: impl AsRef<Path>) -> Result<ActualSeries> {
    parse_actuals(open(path.as_ref())?)
}

pub fn parse_actuals<R: Read>(input: R) -> Result<ActualSeries> {
    let rows = records(input, &ACTUALS_HEADER)?;
    let mut stamps: Vec<i64> = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let ts = timestamp(*line, &rec[0])?;
        if let Some(&previous) = stamps.last() {
            if ts <= previous {
                return Err(IngestError::Ordering {
                    line: *line,
                    timestamp: ts,
                    previous,
                }
                .into());
            }
        }
        stamps.push(ts);
        values.push(number(*line, "value", &rec[1])?);
    }
    ActualSeries::new(TimeIndex::new(stamps)?, values)
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never observe a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Long-format CSV of a panel, ordered by model, time, level.
pub fn forecasts_csv(panel: &ForecastPanel) -> Vec<u8> {
    let (n, t, q) = (panel.n_models(), panel.n_times(), panel.n_levels());
    let rows = (0..n).flat_map(move |m| {
        (0..t).flat_map(move |ti| {
            (0..q).map(move |qi| {
                vec![
                    panel.model_ids()[m].clone(),
                    panel.time().stamps()[ti].to_string(),
                    panel.grid().level(qi).to_string(),
                    panel.value(m, ti, qi).to_string(),
                ]
            })
        })
    });
    csv_bytes(&FORECAST_HEADER, rows)
}

pub fn write_forecasts(panel: &ForecastPanel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &forecasts_csv(panel))
}

pub fn actuals_csv(actuals: &ActualSeries) -> Vec<u8> {
    let rows = actuals
        .time()
        .stamps()
        .iter()
        .zip(actuals.values())
        .map(|(ts, v)| vec![ts.to_string(), v.to_string()]);
    csv_bytes(&ACTUALS_HEADER, rows)
}

pub fn write_actuals(actuals: &ActualSeries, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &actuals_csv(actuals))
}

/// Combined forecast as `timestamp,level,value` rows.
pub fn combined_csv(forecast: &CombinedForecast) -> Vec<u8> {
    let q = forecast.grid().len();
    let rows = (0..forecast.n_times()).flat_map(move |t| {
        (0..q).map(move |qi| {
            vec![
                forecast.time().stamps()[t].to_string(),
                forecast.grid().level(qi).to_string(),
                forecast.value(t, qi).to_string(),
            ]
        })
    });
    csv_bytes(&["timestamp", "level", "value"], rows)
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightsFile {
    schema_version: u32,
    method: MethodTag,
    model_ids: Vec<String>,
    grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    regressor_kind: Option<RegressorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constrained: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coefficients: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intercepts: Option<Vec<f64>>,
    #[serde(default)]
    diagnostics: FitDiagnostics,
}

pub fn weights_json(model: &CombinationModel) -> String {
    let profile = model.profile();
    let file = WeightsFile {
        schema_version: WEIGHTS_SCHEMA_VERSION,
        method: model.method(),
        model_ids: model.model_ids().to_vec(),
        grid: model.grid().levels().to_vec(),
        regressor_kind: profile.map(|p| p.regressor_kind),
        constrained: profile.map(|p| p.constrained),
        coefficients: profile.map(|p| p.per_level.clone()),
        intercepts: profile.and_then(|p| p.intercept_per_level.clone()),
        diagnostics: model.diagnostics().clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("weights serialize");
    text.push('\n');
    text
}

pub fn write_weights(model: &CombinationModel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, weights_json(model).as_bytes())
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<CombinationModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_weights(&text)
}

/// Parses a weights file, checking the schema version before anything else
/// and the profile invariants after.
pub fn parse_weights(text: &str) -> Result<CombinationModel> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::invalid("weights file", "missing schema_version"))?;
    if found != u64::from(WEIGHTS_SCHEMA_VERSION) {
        return Err(Error::SchemaVersion {
            found: found.min(u64::from(u32::MAX)) as u32,
            expected: WEIGHTS_SCHEMA_VERSION,
        });
    }
    let file: WeightsFile = serde_json::from_value(value)?;
    let profile = match file.coefficients {
        Some(per_level) => Some(WeightProfile {
            method: file.method,
            regressor_kind: file.regressor_kind.unwrap_or(RegressorKind::Targeted),
            constrained: file.constrained.unwrap_or(false),
            per_level,
            intercept_per_level: file.intercepts,
        }),
        None => None,
    };
    CombinationModel::new(
        file.method,
        file.model_ids,
        QuantileGrid::new(file.grid)?,
        profile,
        file.diagnostics,
    )
}

/// Formats like C's `%.{digits}g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= p as i32 {
        let m = strip_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One line of a score report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: MethodTag,
    pub series: String,
    pub pinball: f64,
    /// Percentage reduction of the score relative to BI on the same series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improvement_vs_bi: Option<f64>,
}

/// Mean pinball scores keyed by method and series.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportTable {
    rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces the score of `(method, series)`.
    pub fn insert(&mut self, method: MethodTag, series: &str, pinball: f64) -> Result<()> {
        if !(pinball >= 0.0 && pinball.is_finite()) {
            return Err(Error::invalid(
                "report",
                format!("{method} score {pinball} is not a finite non-negative number"),
            ));
        }
        self.rows.retain(|r| !(r.method == method && r.series == series));
        self.rows.push(ReportRow {
            method,
            series: series.to_string(),
            pinball,
            improvement_vs_bi: None,
        });
        self.refresh();
        Ok(())
    }

    pub fn get(&self, method: MethodTag, series: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.series == series)
            .map(|r| r.pinball)
    }

    /// Rows in report order: by method, then series in insertion order.
    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    fn refresh(&mut self) {
        let mut series_order: Vec<String> = Vec::new();
        for r in &self.rows {
            if !series_order.contains(&r.series) {
                series_order.push(r.series.clone());
            }
        }
        let rank = |s: &str| series_order.iter().position(|x| x == s).unwrap_or(usize::MAX);
        self.rows.sort_by_key(|r| (r.method.report_rank(), rank(&r.series)));
        let bi: HashMap<String, f64> = self
            .rows
            .iter()
            .filter(|r| r.method == MethodTag::Bi)
            .map(|r| (r.series.clone(), r.pinball))
            .collect();
        for r in &mut self.rows {
            r.improvement_vs_bi = bi
                .get(&r.series)
                .map(|&b| if b > 0.0 { 100.0 * (b - r.pinball) / b } else { 0.0 });
        }
    }

    /// CSV with six significant digits; the improvement column appears when
    /// a BI row exists for some series.
    pub fn to_csv(&self) -> Vec<u8> {
        let with_improvement = self.rows.iter().any(|r| r.improvement_vs_bi.is_some());
        let mut header = vec!["method", "series", "pinball"];
        if with_improvement {
            header.push("improvement_vs_bi");
        }
        let rows = self.rows.iter().map(|r| {
            let mut row = vec![r.method.to_string(), r.series.clone(), format_sig(r.pinball, 6)];
            if with_improvement {
                row.push(r.improvement_vs_bi.map(|v| format_sig(v, 6)).unwrap_or_default());
            }
            row
        });
        csv_bytes(&header, rows)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut table: ReportTable = serde_json::from_str(text)?;
        table.refresh();
        Ok(table)
    }
}

pub fn write_report(table: &ReportTable, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &table.to_csv())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(269.953, 6), "269.953");
        assert_eq!(format_sig(269.9534999, 6), "269.953");
        assert_eq!(format_sig(0.25, 6), "0.25");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e+06");
        assert_eq!(format_sig(0.0000123456, 6), "1.23456e-05");
        assert_eq!(format_sig(100.0, 6), "100");
        assert_eq!(format_sig(-4.39, 6), "-4.39");
        assert_eq!(format_sig(999999.5, 6), "1e+06");
        assert_eq!(format_sig(0.0, 6), "0");
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("1356998400"), Some(1_356_998_400));
        assert_eq!(parse_timestamp("2013-01-01T00:00:00Z"), Some(1_356_998_400));
        assert_eq!(parse_timestamp("2013-01-01T01:00:00+01:00"), Some(1_356_998_400));
        assert_eq!(parse_timestamp("2013-01-01 00:00:00"), Some(1_356_998_400));
        assert_eq!(parse_timestamp("2013-01-01"), Some(1_356_998_400));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn report_layout() {
        let mut t = ReportTable::new();
        t.insert(MethodTag::CqraT, "SYS", 269.953).unwrap();
        let text = String::from_utf8(t.to_csv()).unwrap();
        assert_eq!(text, "method,series,pinball\nCQRA-T,SYS,269.953\n");
        t.insert(MethodTag::Bi, "SYS", 282.35).unwrap();
        assert_eq!(t.rows()[0].method, MethodTag::Bi);
        let imp = t.rows()[1].improvement_vs_bi.unwrap();
        assert!((imp - 100.0 * (282.35 - 269.953) / 282.35).abs() < 1e-12);
        assert!(t.insert(MethodTag::Sa, "SYS", -1.0).is_err());
        let back = ReportTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }
}
