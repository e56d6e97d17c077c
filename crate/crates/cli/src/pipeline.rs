//! In-memory experiment pipeline: prepare, train, generate, evaluate, and
//! the horizon-sweep and ablation protocols built on top of them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tscf_core::metrics::{self, EvalSample, EvaluationReport};
use tscf_core::{
    base_nn, base_shift, build_bounds, chronological_split, make_windows, search, train, BoundSpec, Checkpoint,
    ForecastModel, Forecaster, Scaler, SearchConfig, SplitSpec, TimeSeries, TrainReport, TrainingBank, WindowPair,
};

use crate::config::{ExperimentConfig, Method};
use crate::error::{CliError, Result};
use crate::synth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSeries {
    pub series_id: String,
    pub reason: String,
}

/// Normalized windows for all three splits plus the scalers that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub split: SplitSpec,
    pub scalers: Vec<Scaler>,
    pub train: Vec<WindowPair>,
    pub val: Vec<WindowPair>,
    pub test: Vec<WindowPair>,
    pub skipped: Vec<SkippedSeries>,
    /// Series whose chunk for a split produced no windows, per split.
    pub empty_chunks: EmptyChunkCounts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmptyChunkCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Dataset {
    pub fn scaler(&self, series_id: &str) -> Option<&Scaler> {
        self.scalers.iter().find(|s| s.series_id == series_id)
    }
}

pub fn load_series(cfg: &ExperimentConfig) -> Result<Vec<TimeSeries>> {
    match (&cfg.data.csv, &cfg.data.synthetic) {
        (Some(path), _) => Ok(tscf_core::load_csv(path)?),
        (None, Some(spec)) => Ok(synth::series_only(synth::generate(spec, cfg.seed)?)),
        (None, None) => Err(CliError::Config("data needs either `csv` or `synthetic`".into())),
    }
}

/// Splits, scales and windows every series. Series that cannot be split are
/// skipped with a warning; it is an error only if nothing usable remains.
pub fn prepare(series: &[TimeSeries], split: &SplitSpec) -> Result<Dataset> {
    split.validate()?;
    let mut ds = Dataset {
        split: *split,
        scalers: Vec::new(),
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        skipped: Vec::new(),
        empty_chunks: EmptyChunkCounts::default(),
    };
    let (d, t, stride) = (split.back_horizon, split.horizon, split.stride);

    for s in series {
        let chunks = match chronological_split(s, split) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("skipping series `{}`: {e}", s.id());
                ds.skipped.push(SkippedSeries {
                    series_id: s.id().to_string(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if chunks.train.values.is_empty() {
            log::warn!("skipping series `{}`: empty training chunk", s.id());
            ds.skipped.push(SkippedSeries {
                series_id: s.id().to_string(),
                reason: "empty training chunk".into(),
            });
            continue;
        }
        let scaler = Scaler::fit(s.id(), &chunks.train.values);
        for (chunk, out, empty) in [
            (&chunks.train, &mut ds.train, &mut ds.empty_chunks.train),
            (&chunks.val, &mut ds.val, &mut ds.empty_chunks.val),
            (&chunks.test, &mut ds.test, &mut ds.empty_chunks.test),
        ] {
            let windows = make_windows(chunk, d, t, stride);
            if windows.is_empty() {
                *empty += 1;
            }
            out.extend(windows.iter().map(|w| w.scaled(&scaler)));
        }
        ds.scalers.push(scaler);
    }

    for (name, count) in [
        ("train", ds.empty_chunks.train),
        ("validation", ds.empty_chunks.val),
        ("test", ds.empty_chunks.test),
    ] {
        if count > 0 {
            log::warn!(
                "{count} series produced no {name} windows (chunk shorter than d + T = {})",
                d + t
            );
        }
    }
    if ds.train.is_empty() && ds.val.is_empty() && ds.test.is_empty() {
        return Err(CliError::Data(format!(
            "every series is too short for back_horizon {d} + horizon {t}"
        )));
    }
    Ok(ds)
}

pub fn train_model(cfg: &ExperimentConfig, ds: &Dataset, seed: u64) -> Result<(Forecaster, TrainReport)> {
    if ds.train.is_empty() {
        return Err(CliError::Data("no training windows".into()));
    }
    if ds.val.is_empty() {
        return Err(CliError::Data("no validation windows".into()));
    }
    let mut model = Forecaster::new(
        cfg.model.kind,
        ds.split.back_horizon,
        ds.split.horizon,
        cfg.model.hidden,
        seed,
    );
    let report = train(&mut model, &ds.train, &ds.val, &cfg.model.train_config(seed))?;
    log::info!(
        "trained {:?}: best validation MAE {:.6} at epoch {}",
        cfg.model.kind,
        report.best_val_mae,
        report.best_epoch
    );
    Ok((model, report))
}

pub fn checkpoint(cfg: &ExperimentConfig, model: &Forecaster, seed: u64) -> Checkpoint {
    Checkpoint::from_model(model, seed, cfg.model.train_config(seed))
}

/// One counterfactual for one test window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfRecord {
    pub sample_id: usize,
    pub series_id: String,
    pub origin_index: usize,
    pub original: Vec<f64>,
    pub counterfactual: Vec<f64>,
    /// Model forecast of `counterfactual`; absent when generated without a model.
    pub forecast: Option<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub iterations_used: usize,
    pub fully_valid: Option<bool>,
}

fn finish_record(
    sample_id: usize,
    w: &WindowPair,
    bounds: &tscf_core::TrajectoryBounds,
    counterfactual: Vec<f64>,
    model: Option<&dyn ForecastModel>,
) -> Result<CfRecord> {
    let (forecast, fully_valid) = match model {
        Some(m) => {
            let f = m.predict(&counterfactual)?;
            let valid = search::mask(&f, bounds)?.iter().all(|&v| v == 0);
            (Some(f), Some(valid))
        }
        None => (None, None),
    };
    Ok(CfRecord {
        sample_id,
        series_id: w.series_id.clone(),
        origin_index: w.origin_index,
        original: w.input.clone(),
        counterfactual,
        forecast,
        alpha: bounds.alpha.clone(),
        beta: bounds.beta.clone(),
        iterations_used: 0,
        fully_valid,
    })
}

/// Runs `method` on every test window. `model` is required for ForecastCF;
/// baselines use it only to record the forecast of their output.
pub fn generate_counterfactuals(
    method: Method,
    model: Option<&Forecaster>,
    ds: &Dataset,
    bound_spec: &BoundSpec,
    search_cfg: &SearchConfig,
) -> Result<Vec<CfRecord>> {
    bound_spec.validate()?;
    if ds.test.is_empty() {
        return Err(CliError::Data("no test windows".into()));
    }
    let horizon = ds.split.horizon;
    let dyn_model = model.map(|m| m as &dyn ForecastModel);
    let bank = TrainingBank::new(ds.train.clone());

    ds.test
        .par_iter()
        .enumerate()
        .map(|(sample_id, w)| -> Result<CfRecord> {
            let bounds = build_bounds(&w.input, horizon, bound_spec)?;
            match method {
                Method::ForecastCf => {
                    let model = dyn_model.ok_or(CliError::MissingArtifact {
                        path: "model.json".into(),
                        needs: "train",
                    })?;
                    let r = search::generate(model, &w.input, &bounds, search_cfg)?;
                    Ok(CfRecord {
                        sample_id,
                        series_id: w.series_id.clone(),
                        origin_index: w.origin_index,
                        original: r.original,
                        counterfactual: r.counterfactual,
                        forecast: Some(r.forecast),
                        alpha: bounds.alpha,
                        beta: bounds.beta,
                        iterations_used: r.iterations_used,
                        fully_valid: Some(r.fully_valid),
                    })
                }
                Method::BaseNn => {
                    if bank.is_empty() {
                        return Err(CliError::Data("training bank is empty".into()));
                    }
                    let cf = base_nn(&bank, &bounds)?;
                    finish_record(sample_id, w, &bounds, cf, dyn_model)
                }
                Method::BaseShift => {
                    let cf = base_shift(&w.input, bound_spec.change_percent);
                    finish_record(sample_id, w, &bounds, cf, dyn_model)
                }
            }
        })
        .collect()
}

/// Scores counterfactual records and attaches the model's accuracy on the
/// original test windows (sMAPE and MASE in original units).
pub fn evaluate_records(
    cfg: &ExperimentConfig,
    model: &Forecaster,
    ds: &Dataset,
    records: &[CfRecord],
) -> Result<EvaluationReport> {
    let samples = records
        .iter()
        .map(|r| -> Result<EvalSample> {
            let forecast = model.predict(&r.counterfactual)?;
            Ok(EvalSample {
                sample_id: r.sample_id,
                original: r.original.clone(),
                counterfactual: r.counterfactual.clone(),
                forecast,
                bounds: tscf_core::TrajectoryBounds::new(r.alpha.clone(), r.beta.clone())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = metrics::evaluate(&samples, cfg.metrics.tol)?;
    report.aggregate.accuracy = Some(test_accuracy(cfg, model, ds)?);
    Ok(report)
}

/// sMAPE/MASE of the model on the test windows, inverted to original units.
pub fn test_accuracy(cfg: &ExperimentConfig, model: &Forecaster, ds: &Dataset) -> Result<metrics::ForecastAccuracy> {
    accuracy_on(cfg, model, ds, &ds.test)
}

pub fn validation_accuracy(
    cfg: &ExperimentConfig,
    model: &Forecaster,
    ds: &Dataset,
) -> Result<metrics::ForecastAccuracy> {
    accuracy_on(cfg, model, ds, &ds.val)
}

fn accuracy_on(
    cfg: &ExperimentConfig,
    model: &Forecaster,
    ds: &Dataset,
    windows: &[WindowPair],
) -> Result<metrics::ForecastAccuracy> {
    let mut raw_windows = Vec::with_capacity(windows.len());
    let mut forecasts = Vec::with_capacity(windows.len());
    for w in windows {
        let scaler = ds
            .scaler(&w.series_id)
            .ok_or_else(|| CliError::Data(format!("no scaler for series `{}`", w.series_id)))?;
        forecasts.push(scaler.invert(&model.predict(&w.input)?));
        raw_windows.push(WindowPair {
            series_id: w.series_id.clone(),
            input: scaler.invert(&w.input),
            target: scaler.invert(&w.target),
            origin_index: w.origin_index,
        });
    }
    Ok(metrics::forecast_accuracy(
        &raw_windows,
        &forecasts,
        cfg.metrics.period,
    )?)
}

/// Output of the main comparison protocol.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub dataset: Dataset,
    pub model: Forecaster,
    pub train_report: TrainReport,
    pub runs: Vec<MethodRun>,
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub records: Vec<CfRecord>,
    pub report: EvaluationReport,
}

impl Comparison {
    pub fn report(&self, method: Method) -> Option<&EvaluationReport> {
        self.runs.iter().find(|r| r.method == method).map(|r| &r.report)
    }
}

/// prepare -> train -> generate (every configured method) -> evaluate.
pub fn run_comparison(cfg: &ExperimentConfig, train_seed: u64) -> Result<Comparison> {
    cfg.validate()?;
    let series = load_series(cfg)?;
    let dataset = prepare(&series, &cfg.split.spec())?;
    let (model, train_report) = train_model(cfg, &dataset, train_seed)?;
    let mut runs = Vec::new();
    for &method in &cfg.methods {
        let records = generate_counterfactuals(method, Some(&model), &dataset, &cfg.bounds, &cfg.search)?;
        let report = evaluate_records(cfg, &model, &dataset, &records)?;
        runs.push(MethodRun {
            method,
            records,
            report,
        });
    }
    Ok(Comparison {
        dataset,
        model,
        train_report,
        runs,
    })
}

/// The four counterfactual metrics plus forecast accuracy, as one table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub validity_ratio: f64,
    pub step_auc: f64,
    pub proximity: f64,
    pub compactness: f64,
    pub smape: Option<f64>,
    pub mase: Option<f64>,
}

impl From<&EvaluationReport> for MetricRow {
    fn from(r: &EvaluationReport) -> Self {
        let acc = r.aggregate.accuracy.as_ref();
        Self {
            validity_ratio: r.aggregate.validity_ratio,
            step_auc: r.aggregate.step_auc,
            proximity: r.aggregate.proximity,
            compactness: r.aggregate.compactness,
            smape: acc.map(|a| a.smape),
            mase: acc.and_then(|a| a.mase),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub horizon: usize,
    pub back_horizon: usize,
    pub metrics: Option<MetricRow>,
    pub error: Option<String>,
}

/// Retrains a model per horizon (back horizon from the configured multiplier)
/// and scores ForecastCF. A failing horizon is recorded and the sweep goes on.
pub fn horizon_sweep(cfg: &ExperimentConfig, horizons: &[usize]) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(CliError::Config(
            "horizons must be a non-empty list of positive integers".into(),
        ));
    }
    let series = load_series(cfg)?;
    Ok(horizons
        .iter()
        .map(|&h| {
            let split = cfg.split.spec_for_horizon(h, None);
            let outcome = (|| -> Result<MetricRow> {
                let ds = prepare(&series, &split)?;
                let (model, _) = train_model(cfg, &ds, cfg.seed)?;
                let records =
                    generate_counterfactuals(Method::ForecastCf, Some(&model), &ds, &cfg.bounds, &cfg.search)?;
                Ok(MetricRow::from(&evaluate_records(cfg, &model, &ds, &records)?))
            })();
            match outcome {
                Ok(m) => SweepRow {
                    horizon: h,
                    back_horizon: split.back_horizon,
                    metrics: Some(m),
                    error: None,
                },
                Err(e) => {
                    log::warn!("horizon {h} failed: {e}");
                    SweepRow {
                        horizon: h,
                        back_horizon: split.back_horizon,
                        metrics: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationParam {
    Cp,
    Fr,
}

impl AblationParam {
    pub fn name(self) -> &'static str {
        match self {
            AblationParam::Cp => "cp",
            AblationParam::Fr => "fr",
        }
    }

    fn apply(self, spec: &BoundSpec, value: f64) -> BoundSpec {
        match self {
            AblationParam::Cp => BoundSpec {
                change_percent: value,
                ..*spec
            },
            AblationParam::Fr => BoundSpec {
                fraction: value,
                ..*spec
            },
        }
    }
}

impl std::str::FromStr for AblationParam {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cp" => Ok(AblationParam::Cp),
            "fr" => Ok(AblationParam::Fr),
            other => Err(CliError::Config(format!(
                "unknown ablation parameter `{other}` (expected cp or fr)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub value: f64,
    pub metrics: Option<MetricRow>,
    pub error: Option<String>,
}

/// ForecastCF metrics for each value of `param`, all against one model.
pub fn ablation_with_model(
    cfg: &ExperimentConfig,
    model: &Forecaster,
    ds: &Dataset,
    param: AblationParam,
    values: &[f64],
) -> Result<Vec<AblationRow>> {
    if values.is_empty() {
        return Err(CliError::Config("ablation needs at least one value".into()));
    }
    Ok(values
        .iter()
        .map(|&value| {
            let spec = param.apply(&cfg.bounds, value);
            let outcome = generate_counterfactuals(Method::ForecastCf, Some(model), ds, &spec, &cfg.search)
                .and_then(|records| evaluate_records(cfg, model, ds, &records));
            match outcome {
                Ok(report) => AblationRow {
                    value,
                    metrics: Some(MetricRow::from(&report)),
                    error: None,
                },
                Err(e) => AblationRow {
                    value,
                    metrics: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

pub fn ablation(cfg: &ExperimentConfig, param: AblationParam, values: &[f64]) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let series = load_series(cfg)?;
    let ds = prepare(&series, &cfg.split.spec())?;
    let (model, _) = train_model(cfg, &ds, cfg.seed)?;
    ablation_with_model(cfg, &model, &ds, param, values)
}
