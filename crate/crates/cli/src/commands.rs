//! Subcommand implementations. Each reads its prerequisites from the output
//! directory, writes its artifacts there and prints a short summary.

use std::path::Path;

use tscf_core::{Checkpoint, Forecaster, TrainReport};

use crate::artifacts::{
    csv_error, csv_with_config, finish_csv, fmt_f64, fmt_opt, read_json, write_json, CounterfactualArtifact,
    DatasetArtifact, Layout, ReportArtifact,
};
use crate::config::{ExperimentConfig, Method};
use crate::error::{CliError, Result};
use crate::pipeline::{self, AblationParam, AblationRow, CfRecord, Dataset, MetricRow, SweepRow};
use crate::synth;

fn layout(cfg: &ExperimentConfig) -> Result<Layout> {
    let layout = Layout::new(&cfg.output_dir);
    layout.create()?;
    Ok(layout)
}

pub fn synth(cfg: &ExperimentConfig) -> Result<()> {
    let spec = cfg
        .data
        .synthetic
        .as_ref()
        .ok_or_else(|| CliError::Config("synth needs a [data.synthetic] section".into()))?;
    let series = synth::series_only(synth::generate(spec, cfg.seed)?);
    let layout = layout(cfg)?;
    let path = layout.synthetic_csv();
    let file = std::fs::File::create(&path).map_err(CliError::io("cannot create", &path))?;
    tscf_core::series::write_csv(std::io::BufWriter::new(file), &series)?;
    println!(
        "wrote {} series of length {} to {}",
        series.len(),
        spec.length,
        path.display()
    );
    Ok(())
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let series = pipeline::load_series(cfg)?;
    let dataset = pipeline::prepare(&series, &cfg.split.spec())?;
    let layout = layout(cfg)?;
    write_json(
        &layout.dataset(),
        &DatasetArtifact {
            config: cfg.to_json(),
            dataset: dataset.clone(),
        },
    )?;
    println!(
        "windows: train {}, val {}, test {} ({} series, {} skipped)",
        dataset.train.len(),
        dataset.val.len(),
        dataset.test.len(),
        dataset.scalers.len(),
        dataset.skipped.len()
    );
    Ok(dataset)
}

fn load_dataset(layout: &Layout) -> Result<Dataset> {
    Ok(read_json::<DatasetArtifact>(&layout.dataset(), "prepare")?.dataset)
}

fn load_model(layout: &Layout) -> Result<Forecaster> {
    let path = layout.model();
    if !path.exists() {
        return Err(CliError::MissingArtifact { path, needs: "train" });
    }
    Ok(Checkpoint::load(&path)?.to_model()?)
}

pub fn train(cfg: &ExperimentConfig) -> Result<(Forecaster, TrainReport)> {
    cfg.validate()?;
    let layout = layout(cfg)?;
    let dataset = load_dataset(&layout)?;
    let (model, report) = pipeline::train_model(cfg, &dataset, cfg.seed)?;
    pipeline::checkpoint(cfg, &model, cfg.seed).save(layout.model())?;

    let path = layout.loss_history();
    let mut w = csv_with_config(&path, cfg)?;
    w.write_record(["epoch", "train_mae", "val_mae"])
        .map_err(csv_error(&path))?;
    w.write_record(["0", "", &fmt_f64(report.initial_val_mae)])
        .map_err(csv_error(&path))?;
    for e in &report.history {
        w.write_record([e.epoch.to_string(), fmt_f64(e.train_mae), fmt_f64(e.val_mae)])
            .map_err(csv_error(&path))?;
    }
    finish_csv(&path, w)?;

    let acc = pipeline::validation_accuracy(cfg, &model, &dataset)?;
    println!(
        "best validation MAE {:.6} at epoch {} of {}; validation sMAPE {:.4}",
        report.best_val_mae,
        report.best_epoch,
        report.history.len(),
        acc.smape
    );
    Ok((model, report))
}

pub fn generate(cfg: &ExperimentConfig, methods: &[Method]) -> Result<()> {
    cfg.validate()?;
    let layout = layout(cfg)?;
    let dataset = load_dataset(&layout)?;
    let model = if layout.model().exists() {
        Some(load_model(&layout)?)
    } else if methods.contains(&Method::ForecastCf) {
        return Err(CliError::MissingArtifact {
            path: layout.model(),
            needs: "train",
        });
    } else {
        None
    };
    for &method in methods {
        let records = pipeline::generate_counterfactuals(method, model.as_ref(), &dataset, &cfg.bounds, &cfg.search)?;
        let valid = records.iter().filter(|r| r.fully_valid == Some(true)).count();
        let mean_iter = records.iter().map(|r| r.iterations_used as f64).sum::<f64>() / records.len() as f64;
        write_json(
            &layout.counterfactuals(method),
            &CounterfactualArtifact {
                config: cfg.to_json(),
                method,
                records,
            },
        )?;
        if model.is_some() {
            println!(
                "{method}: {} counterfactuals, {valid} fully valid, mean iterations {mean_iter:.2}",
                dataset.test.len()
            );
        } else {
            println!("{method}: {} counterfactuals", dataset.test.len());
        }
    }
    Ok(())
}

pub fn evaluate(cfg: &ExperimentConfig, methods: &[Method]) -> Result<Vec<(Method, MetricRow)>> {
    cfg.validate()?;
    let layout = layout(cfg)?;
    let dataset = load_dataset(&layout)?;
    let model = load_model(&layout)?;
    let mut rows = Vec::new();
    for &method in methods {
        let artifact: CounterfactualArtifact = read_json(&layout.counterfactuals(method), "generate")?;
        let report = pipeline::evaluate_records(cfg, &model, &dataset, &artifact.records)?;
        write_samples(&layout.samples(method), cfg, &artifact.records, &report)?;
        let row = MetricRow::from(&report);
        write_json(&layout.report(method), &ReportArtifact::new(cfg, method, report))?;
        println!(
            "{method}: validity {:.4}, step AUC {:.4}, proximity {:.4}, compactness {:.4}",
            row.validity_ratio, row.step_auc, row.proximity, row.compactness
        );
        rows.push((method, row));
    }
    write_comparison(&layout.comparison(), cfg, &rows)?;
    Ok(rows)
}

fn write_samples(
    path: &Path,
    cfg: &ExperimentConfig,
    records: &[CfRecord],
    report: &tscf_core::EvaluationReport,
) -> Result<()> {
    let mut w = csv_with_config(path, cfg)?;
    w.write_record([
        "sample_id",
        "series_id",
        "origin_index",
        "validity_ratio",
        "prefix_valid_steps",
        "proximity",
        "compactness",
        "iterations_used",
        "fully_valid",
    ])
    .map_err(csv_error(path))?;
    for (r, s) in records.iter().zip(&report.per_sample) {
        w.write_record([
            s.sample_id.to_string(),
            r.series_id.clone(),
            r.origin_index.to_string(),
            fmt_f64(s.validity_ratio),
            s.prefix_valid_steps.to_string(),
            fmt_f64(s.proximity),
            fmt_f64(s.compactness),
            r.iterations_used.to_string(),
            r.fully_valid.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_error(path))?;
    }
    finish_csv(path, w)
}

const METRIC_HEADER: [&str; 4] = ["validity_ratio", "step_auc", "proximity", "compactness"];

fn metric_fields(m: Option<&MetricRow>) -> [String; 4] {
    match m {
        Some(m) => [
            fmt_f64(m.validity_ratio),
            fmt_f64(m.step_auc),
            fmt_f64(m.proximity),
            fmt_f64(m.compactness),
        ],
        None => Default::default(),
    }
}

fn write_comparison(path: &Path, cfg: &ExperimentConfig, rows: &[(Method, MetricRow)]) -> Result<()> {
    let mut w = csv_with_config(path, cfg)?;
    let mut header = vec!["method"];
    header.extend(METRIC_HEADER);
    w.write_record(&header).map_err(csv_error(path))?;
    for (method, row) in rows {
        let mut fields = vec![method.to_string()];
        fields.extend(metric_fields(Some(row)));
        w.write_record(&fields).map_err(csv_error(path))?;
    }
    finish_csv(path, w)
}

pub fn sweep_horizon(cfg: &ExperimentConfig, horizons: &[usize]) -> Result<Vec<SweepRow>> {
    let rows = pipeline::horizon_sweep(cfg, horizons)?;
    let layout = layout(cfg)?;
    let path = layout.sweep();
    let mut w = csv_with_config(&path, cfg)?;
    let mut header = vec!["horizon", "back_horizon"];
    header.extend(METRIC_HEADER);
    header.extend(["smape", "mase", "error"]);
    w.write_record(&header).map_err(csv_error(&path))?;
    for r in &rows {
        let mut fields = vec![r.horizon.to_string(), r.back_horizon.to_string()];
        fields.extend(metric_fields(r.metrics.as_ref()));
        fields.push(fmt_opt(r.metrics.as_ref().and_then(|m| m.smape)));
        fields.push(fmt_opt(r.metrics.as_ref().and_then(|m| m.mase)));
        fields.push(r.error.clone().unwrap_or_default());
        w.write_record(&fields).map_err(csv_error(&path))?;
        match &r.metrics {
            Some(m) => println!(
                "T={:<3} validity {:.4}, step AUC {:.4}, proximity {:.4}, compactness {:.4}",
                r.horizon, m.validity_ratio, m.step_auc, m.proximity, m.compactness
            ),
            None => println!("T={:<3} failed: {}", r.horizon, r.error.as_deref().unwrap_or("")),
        }
    }
    finish_csv(&path, w)?;
    Ok(rows)
}

pub fn ablate(cfg: &ExperimentConfig, param: AblationParam, values: &[f64]) -> Result<Vec<AblationRow>> {
    let rows = pipeline::ablation(cfg, param, values)?;
    let layout = layout(cfg)?;
    let path = layout.ablation(param.name());
    let mut w = csv_with_config(&path, cfg)?;
    let mut header = vec!["param", "value"];
    header.extend(METRIC_HEADER);
    header.push("error");
    w.write_record(&header).map_err(csv_error(&path))?;
    for r in &rows {
        let mut fields = vec![param.name().to_string(), fmt_f64(r.value)];
        fields.extend(metric_fields(r.metrics.as_ref()));
        fields.push(r.error.clone().unwrap_or_default());
        w.write_record(&fields).map_err(csv_error(&path))?;
        match &r.metrics {
            Some(m) => println!(
                "{}={:<6} validity {:.4}, step AUC {:.4}, proximity {:.4}, compactness {:.4}",
                param.name(),
                r.value,
                m.validity_ratio,
                m.step_auc,
                m.proximity,
                m.compactness
            ),
            None => println!(
                "{}={} failed: {}",
                param.name(),
                r.value,
                r.error.as_deref().unwrap_or("")
            ),
        }
    }
    finish_csv(&path, w)?;
    Ok(rows)
}

/// Full pipeline in one call. With `repeats > 1` the comparison is rerun
/// with training seeds `seed, seed + 1, ...` and per-repeat plus mean rows
/// go to `repeats.csv`.
pub fn run(cfg: &ExperimentConfig, repeats: usize) -> Result<()> {
    if repeats == 0 {
        return Err(CliError::Config("--repeats must be at least 1".into()));
    }
    cfg.validate()?;
    if cfg.data.csv.is_none() {
        synth(cfg)?;
    }
    prepare(cfg)?;
    train(cfg)?;
    generate(cfg, &cfg.methods)?;
    evaluate(cfg, &cfg.methods)?;
    if repeats == 1 {
        return Ok(());
    }

    let mut per_repeat = Vec::with_capacity(repeats);
    for r in 0..repeats as u64 {
        let seed = cfg.seed.wrapping_add(r);
        let cmp = pipeline::run_comparison(cfg, seed)?;
        per_repeat.push((
            seed,
            cmp.runs
                .iter()
                .map(|run| (run.method, MetricRow::from(&run.report)))
                .collect::<Vec<_>>(),
        ));
    }
    let layout = layout(cfg)?;
    let path = layout.repeats();
    let mut w = csv_with_config(&path, cfg)?;
    let mut header = vec!["repeat", "train_seed", "method"];
    header.extend(METRIC_HEADER);
    w.write_record(&header).map_err(csv_error(&path))?;
    for (i, (seed, rows)) in per_repeat.iter().enumerate() {
        for (method, row) in rows {
            let mut fields = vec![i.to_string(), seed.to_string(), method.to_string()];
            fields.extend(metric_fields(Some(row)));
            w.write_record(&fields).map_err(csv_error(&path))?;
        }
    }
    for (j, &method) in cfg.methods.iter().enumerate() {
        let n = per_repeat.len() as f64;
        let mean = |f: fn(&MetricRow) -> f64| per_repeat.iter().map(|(_, rows)| f(&rows[j].1)).sum::<f64>() / n;
        let row = MetricRow {
            validity_ratio: mean(|m| m.validity_ratio),
            step_auc: mean(|m| m.step_auc),
            proximity: mean(|m| m.proximity),
            compactness: mean(|m| m.compactness),
            smape: None,
            mase: None,
        };
        println!(
            "{method} mean over {repeats} repeats: validity {:.4}, step AUC {:.4}, proximity {:.4}, compactness {:.4}",
            row.validity_ratio, row.step_auc, row.proximity, row.compactness
        );
        let mut fields = vec!["mean".to_string(), String::new(), method.to_string()];
        fields.extend(metric_fields(Some(&row)));
        w.write_record(&fields).map_err(csv_error(&path))?;
    }
    finish_csv(&path, w)
}
