//! Forecast accuracy (sMAPE, MASE) and counterfactual quality (validity
//! ratio, stepwise validity AUC, proximity, compactness).

use serde::{Deserialize, Serialize};

use crate::bounds::TrajectoryBounds;
use crate::error::{check_len, Error, Result};
use crate::forecaster::seasonal_naive_error;
use crate::series::WindowPair;

/// Default compactness tolerance, in normalized units.
pub const DEFAULT_TOL: f64 = 0.01;

/// Symmetric MAPE in percent, range `[0, 200]`. Steps where both values are
/// zero contribute 0.
pub fn smape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_len("smape", actual.len(), forecast.len())?;
    if actual.is_empty() {
        return Err(Error::Empty("smape input"));
    }
    let total: f64 = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| {
            let denom = a.abs() + f.abs();
            if denom == 0.0 {
                0.0
            } else {
                (a - f).abs() / denom
            }
        })
        .sum();
    Ok(200.0 * total / actual.len() as f64)
}

/// Horizon MAE scaled by the in-window seasonal-naive error. `None` when the
/// window has no seasonal variation (zero denominator).
pub fn mase(window: &WindowPair, forecast: &[f64], period: usize) -> Result<Option<f64>> {
    check_len("mase forecast", window.target.len(), forecast.len())?;
    if forecast.is_empty() {
        return Err(Error::Empty("mase forecast"));
    }
    let scale = seasonal_naive_error(&window.concatenated(), period)?;
    if scale == 0.0 {
        return Ok(None);
    }
    let mae = window
        .target
        .iter()
        .zip(forecast)
        .map(|(a, f)| (a - f).abs())
        .sum::<f64>()
        / forecast.len() as f64;
    Ok(Some(mae / scale))
}

/// Per-step in-band indicator.
pub fn step_validity(forecast: &[f64], bounds: &TrajectoryBounds) -> Result<Vec<bool>> {
    check_len("validity forecast", bounds.len(), forecast.len())?;
    Ok(forecast
        .iter()
        .enumerate()
        .map(|(i, &f)| bounds.contains(i, f))
        .collect())
}

fn fraction_true(flags: &[bool]) -> f64 {
    flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64
}

/// Number of consecutively valid steps counted from the first.
pub fn valid_prefix_len(flags: &[bool]) -> usize {
    flags.iter().take_while(|&&b| b).count()
}

fn check_results(forecasts: &[Vec<f64>], bounds: &[TrajectoryBounds]) -> Result<()> {
    check_len("result bounds", forecasts.len(), bounds.len())?;
    if forecasts.is_empty() {
        return Err(Error::Empty("result set"));
    }
    Ok(())
}

/// Mean over samples of the fraction of in-band forecast steps.
pub fn validity_ratio(forecasts: &[Vec<f64>], bounds: &[TrajectoryBounds]) -> Result<f64> {
    check_results(forecasts, bounds)?;
    let mut total = 0.0;
    for (f, b) in forecasts.iter().zip(bounds) {
        total += fraction_true(&step_validity(f, b)?);
    }
    Ok(total / forecasts.len() as f64)
}

/// Area under the curve "fraction of samples with at least `t` consecutively
/// valid steps from the first" over `t / T`, which is the mean of
/// `prefix_len / T`.
pub fn step_auc(forecasts: &[Vec<f64>], bounds: &[TrajectoryBounds]) -> Result<f64> {
    check_results(forecasts, bounds)?;
    let mut total = 0.0;
    for (f, b) in forecasts.iter().zip(bounds) {
        let flags = step_validity(f, b)?;
        total += valid_prefix_len(&flags) as f64 / flags.len() as f64;
    }
    Ok(total / forecasts.len() as f64)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn compact_fraction(a: &[f64], b: &[f64], tol: f64) -> f64 {
    a.iter().zip(b).filter(|(x, y)| (*x - *y).abs() <= tol).count() as f64 / a.len() as f64
}

fn check_pairs(originals: &[Vec<f64>], counterfactuals: &[Vec<f64>]) -> Result<()> {
    check_len("counterfactual count", originals.len(), counterfactuals.len())?;
    if originals.is_empty() {
        return Err(Error::Empty("counterfactual set"));
    }
    for (o, c) in originals.iter().zip(counterfactuals) {
        check_len("counterfactual length", o.len(), c.len())?;
        if o.is_empty() {
            return Err(Error::Empty("counterfactual window"));
        }
    }
    Ok(())
}

/// Mean Euclidean distance between original and counterfactual windows.
pub fn proximity(originals: &[Vec<f64>], counterfactuals: &[Vec<f64>]) -> Result<f64> {
    check_pairs(originals, counterfactuals)?;
    let total: f64 = originals
        .iter()
        .zip(counterfactuals)
        .map(|(o, c)| euclidean(o, c))
        .sum();
    Ok(total / originals.len() as f64)
}

/// Mean fraction of window steps changed by at most `tol`.
pub fn compactness(originals: &[Vec<f64>], counterfactuals: &[Vec<f64>], tol: f64) -> Result<f64> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidConfig(format!("tol must be non-negative, got {tol}")));
    }
    check_pairs(originals, counterfactuals)?;
    let total: f64 = originals
        .iter()
        .zip(counterfactuals)
        .map(|(o, c)| compact_fraction(o, c, tol))
        .sum();
    Ok(total / originals.len() as f64)
}

/// Everything needed to score one counterfactual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSample {
    pub sample_id: usize,
    pub original: Vec<f64>,
    pub counterfactual: Vec<f64>,
    /// Model forecast of the counterfactual.
    pub forecast: Vec<f64>,
    pub bounds: TrajectoryBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScores {
    pub sample_id: usize,
    pub validity_ratio: f64,
    pub prefix_valid_steps: usize,
    pub proximity: f64,
    pub compactness: f64,
}

/// Forecast accuracy of the model on the original test windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastAccuracy {
    pub smape: f64,
    /// Mean over windows with a defined MASE.
    pub mase: Option<f64>,
    /// Windows excluded from `mase` because their seasonal-naive error is 0.
    pub mase_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub validity_ratio: f64,
    pub step_auc: f64,
    pub proximity: f64,
    pub compactness: f64,
    #[serde(default)]
    pub accuracy: Option<ForecastAccuracy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tol: f64,
    /// Number of samples.
    pub k: usize,
    pub aggregate: Aggregate,
    pub per_sample: Vec<SampleScores>,
}

/// Scores a set of counterfactuals. Aggregates are plain means in sample order.
pub fn evaluate(samples: &[EvalSample], tol: f64) -> Result<EvaluationReport> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation sample set"));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidConfig(format!("tol must be non-negative, got {tol}")));
    }
    let mut per_sample = Vec::with_capacity(samples.len());
    for s in samples {
        check_len("counterfactual length", s.original.len(), s.counterfactual.len())?;
        let flags = step_validity(&s.forecast, &s.bounds)?;
        per_sample.push(SampleScores {
            sample_id: s.sample_id,
            validity_ratio: fraction_true(&flags),
            prefix_valid_steps: valid_prefix_len(&flags),
            proximity: euclidean(&s.original, &s.counterfactual),
            compactness: compact_fraction(&s.original, &s.counterfactual, tol),
        });
    }

    let forecasts: Vec<Vec<f64>> = samples.iter().map(|s| s.forecast.clone()).collect();
    let bounds: Vec<TrajectoryBounds> = samples.iter().map(|s| s.bounds.clone()).collect();
    let originals: Vec<Vec<f64>> = samples.iter().map(|s| s.original.clone()).collect();
    let cfs: Vec<Vec<f64>> = samples.iter().map(|s| s.counterfactual.clone()).collect();

    Ok(EvaluationReport {
        tol,
        k: samples.len(),
        aggregate: Aggregate {
            validity_ratio: validity_ratio(&forecasts, &bounds)?,
            step_auc: step_auc(&forecasts, &bounds)?,
            proximity: proximity(&originals, &cfs)?,
            compactness: compactness(&originals, &cfs, tol)?,
            accuracy: None,
        },
        per_sample,
    })
}

/// Mean sMAPE and MASE over windows; `forecasts[i]` predicts `windows[i]`.
/// Both must be in the same (original) units.
pub fn forecast_accuracy(windows: &[WindowPair], forecasts: &[Vec<f64>], period: usize) -> Result<ForecastAccuracy> {
    check_len("accuracy forecasts", windows.len(), forecasts.len())?;
    if windows.is_empty() {
        return Err(Error::Empty("accuracy window set"));
    }
    let mut smape_total = 0.0;
    let mut mase_total = 0.0;
    let mut mase_count = 0usize;
    for (w, f) in windows.iter().zip(forecasts) {
        smape_total += smape(&w.target, f)?;
        if let Some(m) = mase(w, f, period)? {
            mase_total += m;
            mase_count += 1;
        }
    }
    Ok(ForecastAccuracy {
        smape: smape_total / windows.len() as f64,
        mase: (mase_count > 0).then(|| mase_total / mase_count as f64),
        mase_excluded: windows.len() - mase_count,
    })
}
