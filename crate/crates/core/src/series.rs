//! Univariate series ingestion, chronological splitting, rolling-origin
//! windowing and per-series min-max scaling.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One univariate series with an identifier. Never empty, always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    id: String,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(Error::SeriesTooShort { id, len: 0, min: 1 });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { id, index });
        }
        Ok(Self { id, values })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always `false`; a `TimeSeries` holds at least one value.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Chronological split fractions plus the windowing geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    /// Back-horizon length `d`.
    pub back_horizon: usize,
    /// Forecast horizon `T`.
    pub horizon: usize,
    pub stride: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.6,
            val_frac: 0.2,
            test_frac: 0.2,
            back_horizon: 20,
            horizon: 10,
            stride: 1,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train_frac", self.train_frac),
            ("val_frac", self.val_frac),
            ("test_frac", self.test_frac),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        let total = self.train_frac + self.val_frac + self.test_frac;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions must sum to 1, got {total}"
            )));
        }
        if self.back_horizon == 0 || self.horizon == 0 || self.stride == 0 {
            return Err(Error::InvalidConfig(
                "back_horizon, horizon and stride must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Length of one window, `d + T`.
    pub fn window_len(&self) -> usize {
        self.back_horizon + self.horizon
    }
}

/// A contiguous piece of one series, remembering where it started.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub series_id: String,
    /// Index of `values[0]` in the source series.
    pub offset: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitChunks {
    pub train: Chunk,
    pub val: Chunk,
    pub test: Chunk,
}

/// One (back-horizon, horizon) sample. `target` starts right after `input`
/// in the source series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPair {
    pub series_id: String,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    /// Position of `input[0]` in the source series.
    pub origin_index: usize,
}

impl WindowPair {
    /// `input ‖ target`.
    pub fn concatenated(&self) -> Vec<f64> {
        let mut all = Vec::with_capacity(self.input.len() + self.target.len());
        all.extend_from_slice(&self.input);
        all.extend_from_slice(&self.target);
        all
    }

    pub fn scaled(&self, scaler: &Scaler) -> WindowPair {
        WindowPair {
            series_id: self.series_id.clone(),
            input: scaler.apply(&self.input),
            target: scaler.apply(&self.target),
            origin_index: self.origin_index,
        }
    }
}

/// Splits a series into train/validation/test chunks in temporal order.
///
/// Train and validation lengths are `floor(n * frac)`; test takes the rest.
pub fn chronological_split(series: &TimeSeries, spec: &SplitSpec) -> Result<SplitChunks> {
    spec.validate()?;
    let n = series.len();
    if n < 3 {
        return Err(Error::SeriesTooShort {
            id: series.id().to_string(),
            len: n,
            min: 3,
        });
    }
    // The epsilon absorbs representation error such as 10 * 0.7 = 7.000000000000001
    // as well as products landing just below an integer.
    let floor_len = |frac: f64| ((n as f64) * frac + 1e-9).floor() as usize;
    let n_train = floor_len(spec.train_frac).min(n);
    let n_val = floor_len(spec.val_frac).min(n - n_train);

    let values = series.values();
    let chunk = |start: usize, end: usize| Chunk {
        series_id: series.id().to_string(),
        offset: start,
        values: values[start..end].to_vec(),
    };
    Ok(SplitChunks {
        train: chunk(0, n_train),
        val: chunk(n_train, n_train + n_val),
        test: chunk(n_train + n_val, n),
    })
}

/// Rolling-origin windows at origins `0, stride, 2*stride, ...` while the
/// whole window fits. A chunk shorter than `d + T` yields no windows.
pub fn make_windows(chunk: &Chunk, back_horizon: usize, horizon: usize, stride: usize) -> Vec<WindowPair> {
    assert!(stride > 0, "stride must be positive");
    let span = back_horizon + horizon;
    let len = chunk.values.len();
    if len < span {
        return Vec::new();
    }
    (0..=len - span)
        .step_by(stride)
        .map(|origin| WindowPair {
            series_id: chunk.series_id.clone(),
            input: chunk.values[origin..origin + back_horizon].to_vec(),
            target: chunk.values[origin + back_horizon..origin + span].to_vec(),
            origin_index: chunk.offset + origin,
        })
        .collect()
}

/// Min-max scaler fitted on one series' training chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub series_id: String,
    pub min: f64,
    pub max: f64,
}

impl Scaler {
    /// Panics on an empty chunk; callers skip series without training data.
    pub fn fit(series_id: impl Into<String>, train: &[f64]) -> Self {
        assert!(!train.is_empty(), "cannot fit a scaler on an empty chunk");
        let (min, max) = train.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        Self {
            series_id: series_id.into(),
            min,
            max,
        }
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn is_degenerate(&self) -> bool {
        self.range() <= 0.0
    }

    /// Maps `min -> 0` and `max -> 1`. A degenerate range maps everything to 0.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        if self.is_degenerate() {
            return vec![0.0; values.len()];
        }
        let range = self.range();
        values.iter().map(|v| (v - self.min) / range).collect()
    }

    pub fn invert(&self, values: &[f64]) -> Vec<f64> {
        if self.is_degenerate() {
            return vec![self.min; values.len()];
        }
        let range = self.range();
        values.iter().map(|v| v * range + self.min).collect()
    }
}

pub fn fit_scaler(train: &[f64], series_id: &str) -> Scaler {
    Scaler::fit(series_id, train)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Timestamp {
    Int(i64),
    Text(String),
}

impl Timestamp {
    fn parse(raw: &str) -> Self {
        match raw.parse::<i64>() {
            Ok(v) => Timestamp::Int(v),
            Err(_) => Timestamp::Text(raw.to_string()),
        }
    }

    fn cmp_with(&self, other: &Timestamp) -> Ordering {
        match (self, other) {
            (Timestamp::Int(a), Timestamp::Int(b)) => a.cmp(b),
            _ => self.as_text().cmp(&other.as_text()),
        }
    }

    fn as_text(&self) -> String {
        match self {
            Timestamp::Int(v) => v.to_string(),
            Timestamp::Text(s) => s.clone(),
        }
    }
}

/// Reads a long-format CSV (`series_id,timestamp,value`) from disk.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<TimeSeries>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file)
}

/// Parses long-format CSV. Series come back in order of first appearance;
/// rows of one series must have strictly increasing timestamps.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<TimeSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let expected = ["series_id", "timestamp", "value"];
    if headers.len() < 3 || headers.iter().take(3).ne(expected.iter().copied()) {
        if headers.is_empty() {
            return Err(Error::NoDataRows);
        }
        return Err(Error::BadRow {
            row: 1,
            message: format!(
                "expected header `series_id,timestamp,value`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut columns: Vec<(Vec<f64>, Timestamp)> = Vec::new();

    for record in rdr.records() {
        let record = record?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() < 3 {
            return Err(Error::BadRow {
                row,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let id = &record[0];
        let ts = Timestamp::parse(&record[1]);
        let value: f64 = record[2].parse().map_err(|_| Error::BadRow {
            row,
            message: format!("non-numeric value `{}`", &record[2]),
        })?;
        if !value.is_finite() {
            return Err(Error::BadRow {
                row,
                message: format!("non-finite value `{}`", &record[2]),
            });
        }

        match index.get(id) {
            Some(&slot) => {
                let (values, last) = &mut columns[slot];
                match ts.cmp_with(last) {
                    Ordering::Greater => {}
                    Ordering::Equal => {
                        return Err(Error::BadRow {
                            row,
                            message: format!("duplicate timestamp `{}` for series `{id}`", ts.as_text()),
                        })
                    }
                    Ordering::Less => {
                        return Err(Error::BadRow {
                            row,
                            message: format!(
                                "timestamp `{}` for series `{id}` is not after `{}`",
                                ts.as_text(),
                                last.as_text()
                            ),
                        })
                    }
                }
                values.push(value);
                *last = ts;
            }
            None => {
                index.insert(id.to_string(), columns.len());
                order.push(id.to_string());
                columns.push((vec![value], ts));
            }
        }
    }

    if order.is_empty() {
        return Err(Error::NoDataRows);
    }
    order
        .into_iter()
        .zip(columns)
        .map(|(id, (values, _))| TimeSeries::new(id, values))
        .collect()
}

/// Writes series in long format with integer timestamps `0..n`.
pub fn write_csv<W: std::io::Write>(writer: W, series: &[TimeSeries]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["series_id", "timestamp", "value"])?;
    for s in series {
        for (t, v) in s.values().iter().enumerate() {
            wtr.write_record([s.id(), &t.to_string(), &v.to_string()])?;
        }
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}
