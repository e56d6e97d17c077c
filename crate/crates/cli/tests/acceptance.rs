//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. Built with `harness = false`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tscf_cli::config::{ExperimentConfig, Method};
use tscf_cli::pipeline::{self, AblationParam, Comparison};
use tscf_core::metrics;
use tscf_core::{
    band_loss, build_bounds, limited_bounds, loss_input_gradient, mask, polynomial_bounds, search, BoundSpec, Center,
    ForecastModel, Forecaster, LinearAr, Mlp, SearchConfig, TrajectoryBounds, WindowPair,
};

/// Validation sMAPE the fixture MLP must beat (measured 8.28).
const FIXTURE_VAL_SMAPE_MAX: f64 = 10.0;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(
        elapsed < limit,
        format!("took {:.1}s, limit {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()),
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn fd_loss_gradient(model: &dyn ForecastModel, x: &[f64], bounds: &TrajectoryBounds, v: &[u8], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let up = band_loss(&model.predict(&probe).unwrap(), bounds, v).unwrap();
            probe[j] = x[j] - h;
            let down = band_loss(&model.predict(&probe).unwrap(), bounds, v).unwrap();
            probe[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let (d, t) = (20, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for draw in 0..100u64 {
        let models = [
            Forecaster::Linear(LinearAr::seeded(d, t, draw)),
            Forecaster::Mlp(Mlp::seeded(d, 16, t, draw)),
        ];
        for model in &models {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = model.predict(&x).unwrap();
            // band around a random offset of the forecast so some steps are outside
            let (alpha, beta): (Vec<f64>, Vec<f64>) = f
                .iter()
                .map(|&fi| {
                    let c = fi + rng.random_range(-0.5..0.5);
                    let w = rng.random_range(0.01..0.3);
                    (c - w, c + w)
                })
                .unzip();
            let bounds = TrajectoryBounds::new(alpha, beta).unwrap();
            let v = mask(&f, &bounds).unwrap();
            if v.iter().all(|&vi| vi == 0) {
                continue;
            }
            let g = loss_input_gradient(model, &x, &bounds, &v).unwrap();
            let fd = fd_loss_gradient(model, &x, &bounds, &v, 1e-5);
            worst = worst.max(rel_err(&g, &fd));
            checked += 1;
        }
    }
    ensure(checked >= 150, format!("only {checked} draws had an invalid step"))?;
    ensure(worst <= 1e-4, format!("worst relative error {worst:.3e}"))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{checked} draws, worst relative error {worst:.2e}"))
}

fn metric_oracles() -> Outcome {
    let s = metrics::smape(&[100.0], &[50.0]).map_err(|e| e.to_string())?;
    ensure((s - 200.0 / 3.0).abs() <= 1e-3, format!("smape {s}"))?;

    let w = WindowPair {
        series_id: "m".into(),
        input: vec![1.0, 2.0, 3.0],
        target: vec![4.0],
        origin_index: 0,
    };
    let m = metrics::mase(&w, &[3.0], 1).map_err(|e| e.to_string())?;
    ensure(m == Some(1.0), format!("mase {m:?}"))?;

    let p = metrics::proximity(&[vec![0.0, 0.0]], &[vec![3.0, 4.0]]).map_err(|e| e.to_string())?;
    ensure(p == 5.0, format!("proximity {p}"))?;

    let band = TrajectoryBounds::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
    let auc = metrics::step_auc(&[vec![0.5, 2.0, 0.5]], std::slice::from_ref(&band)).map_err(|e| e.to_string())?;
    ensure(auc == 1.0 / 3.0, format!("step_auc {auc}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for set in 0..1000 {
        let k = rng.random_range(1..20);
        let t = rng.random_range(1..12);
        let mut forecasts = Vec::with_capacity(k);
        let mut bounds = Vec::with_capacity(k);
        for _ in 0..k {
            forecasts.push((0..t).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>());
            let (a, b): (Vec<f64>, Vec<f64>) = (0..t)
                .map(|_| {
                    let lo: f64 = rng.random_range(-1.0..0.5);
                    (lo, lo + rng.random_range(0.0..1.5))
                })
                .unzip();
            bounds.push(TrajectoryBounds::new(a, b).unwrap());
        }
        let vr = metrics::validity_ratio(&forecasts, &bounds).unwrap();
        let sa = metrics::step_auc(&forecasts, &bounds).unwrap();
        ensure(sa <= vr, format!("set {set}: step_auc {sa} > validity {vr}"))?;
    }
    Ok("smape, mase, proximity, step_auc oracles exact; inequality on 1000 sets".into())
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn pop_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn bounds_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut max_width_err = 0.0f64;
    for poly_order in 1..=3u32 {
        for _ in 0..100 {
            let x: Vec<f64> = (0..20).map(|_| rng.random_range(0.1..2.0)).collect();
            let fr = rng.random_range(0.25..5.0);
            let spec = BoundSpec {
                center: Center::Median,
                shift: 0.0,
                fraction: fr,
                change_percent: 0.0,
                poly_order,
                limits: None,
            };
            let b = polynomial_bounds(&x, 10, &spec).map_err(|e| e.to_string())?;
            ensure(
                b.alpha.iter().all(|&a| a == b.alpha[0]) && b.beta.iter().all(|&v| v == b.beta[0]),
                format!("cp = 0 bounds not constant at poly_order {poly_order}"),
            )?;
            let expected = 2.0 * median(&x) * fr * pop_std(&x);
            for (a, v) in b.alpha.iter().zip(&b.beta) {
                max_width_err = max_width_err.max((v - a - expected).abs());
            }

            // width is also constant along a non-flat ramp
            let ramped = polynomial_bounds(
                &x,
                10,
                &BoundSpec {
                    change_percent: rng.random_range(-0.5..0.5),
                    ..spec
                },
            )
            .map_err(|e| e.to_string())?;
            for (a, v) in ramped.alpha.iter().zip(&ramped.beta) {
                max_width_err = max_width_err.max((v - a - expected).abs());
            }

            let mid = (b.alpha[0] + b.beta[0]) / 2.0;
            let lo = mid - rng.random_range(0.0..1.0);
            let hi = mid + rng.random_range(0.0..1.0);
            let once = limited_bounds(&ramped, lo, hi);
            if let Ok(once) = once {
                let twice = limited_bounds(&once, lo, hi).map_err(|e| e.to_string())?;
                ensure(once == twice, "limited_bounds is not idempotent")?;
            }
        }
    }
    ensure(max_width_err <= 1e-9, format!("band width error {max_width_err:.3e}"))?;
    Ok(format!("300 windows, max width error {max_width_err:.1e}"))
}

fn search_validity(fx: &Fixture) -> Outcome {
    let cfg = &fx.cfg;
    ensure(
        cfg.bounds.change_percent == 0.1 && cfg.bounds.fraction == 1.0 && cfg.search.max_iter == 100,
        "fixture config drifted from cp = 0.1, fr = 1, max_iter = 100",
    )?;
    ensure(
        fx.val_smape < FIXTURE_VAL_SMAPE_MAX,
        format!("validation sMAPE {:.3} not below {FIXTURE_VAL_SMAPE_MAX}", fx.val_smape),
    )?;
    let r = fx.cmp.report(Method::ForecastCf).ok_or("no forecastcf run")?;
    let a = &r.aggregate;
    ensure(a.validity_ratio >= 0.90, format!("validity {:.4}", a.validity_ratio))?;
    ensure(a.step_auc >= 0.75, format!("step_auc {:.4}", a.step_auc))?;
    within(fx.elapsed, Duration::from_secs(300))?;
    Ok(format!(
        "val sMAPE {:.2}, validity {:.4}, step_auc {:.4}, {} windows in {:.1}s",
        fx.val_smape,
        a.validity_ratio,
        a.step_auc,
        r.k,
        fx.elapsed.as_secs_f64()
    ))
}

fn brute_force_nearest(bank: &[WindowPair], bounds: &TrajectoryBounds) -> usize {
    let mid: Vec<f64> = bounds
        .alpha
        .iter()
        .zip(&bounds.beta)
        .map(|(a, b)| (a + b) / 2.0)
        .collect();
    let mut best = (f64::INFINITY, 0);
    for (i, w) in bank.iter().enumerate() {
        let d: f64 = w
            .target
            .iter()
            .zip(&mid)
            .map(|(y, m)| (y - m).powi(2))
            .sum::<f64>()
            .sqrt();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

fn method_ranking(fx: &Fixture) -> Outcome {
    let get = |m| {
        fx.cmp
            .report(m)
            .map(|r| r.aggregate.clone())
            .ok_or(format!("no {m} run"))
    };
    let cf = get(Method::ForecastCf)?;
    let nn = get(Method::BaseNn)?;
    let shift = get(Method::BaseShift)?;
    for (name, base) in [("basenn", &nn), ("baseshift", &shift)] {
        ensure(
            cf.validity_ratio > base.validity_ratio,
            format!(
                "validity {:.4} not above {name} {:.4}",
                cf.validity_ratio, base.validity_ratio
            ),
        )?;
        ensure(
            cf.step_auc > base.step_auc,
            format!("step_auc {:.4} not above {name} {:.4}", cf.step_auc, base.step_auc),
        )?;
    }
    ensure(
        cf.compactness > nn.compactness,
        format!(
            "compactness {:.4} not above basenn {:.4}",
            cf.compactness, nn.compactness
        ),
    )?;

    let bank = &fx.cmp.dataset.train;
    let nn_run = fx.cmp.runs.iter().find(|r| r.method == Method::BaseNn).unwrap();
    for rec in &nn_run.records {
        let bounds = TrajectoryBounds::new(rec.alpha.clone(), rec.beta.clone()).unwrap();
        let idx = brute_force_nearest(bank, &bounds);
        ensure(
            rec.counterfactual == bank[idx].input,
            format!("sample {}: basenn output is not bank window {idx}", rec.sample_id),
        )?;
    }
    Ok(format!(
        "validity {:.3}/{:.3}/{:.3}, step_auc {:.3}/{:.3}/{:.3}, compactness {:.3} vs basenn {:.3}; {} basenn outputs match brute force",
        cf.validity_ratio,
        nn.validity_ratio,
        shift.validity_ratio,
        cf.step_auc,
        nn.step_auc,
        shift.step_auc,
        cf.compactness,
        nn.compactness,
        nn_run.records.len()
    ))
}

fn ablation_trends(fx: &Fixture) -> Outcome {
    let start = Instant::now();
    let validity = |param, values: &[f64]| -> Result<Vec<f64>, String> {
        pipeline::ablation_with_model(&fx.cfg, &fx.cmp.model, &fx.cmp.dataset, param, values)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|r| r.metrics.map(|m| m.validity_ratio).ok_or(r.error.unwrap_or_default()))
            .collect()
    };
    let frs = [0.25, 0.5, 1.0, 2.0, 5.0];
    let by_fr = validity(AblationParam::Fr, &frs)?;
    ensure(
        by_fr.windows(2).all(|w| w[0] <= w[1]),
        format!("validity over fr {frs:?} not non-decreasing: {by_fr:?}"),
    )?;
    let by_cp = validity(AblationParam::Cp, &[-0.25, 0.0, 0.25])?;
    ensure(
        by_cp[1] >= by_cp[0] && by_cp[1] >= by_cp[2],
        format!("validity at cp = 0 not maximal: {by_cp:?}"),
    )?;
    within(start.elapsed(), Duration::from_secs(600))?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    Ok(format!("fr: {}; cp -0.25/0/0.25: {}", fmt(&by_fr), fmt(&by_cp)))
}

fn run_cli(out: &Path) -> Result<(), String> {
    let output = Command::new(env!("CARGO_BIN_EXE_tscf"))
        .args(["run", "--seed", "42", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        output.status.success(),
        format!("tscf run failed: {}", String::from_utf8_lossy(&output.stderr)),
    )
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_cli(a.path())?;
    run_cli(b.path())?;
    let mut files = vec!["comparison.csv".to_string(), "model.json".to_string()];
    for m in Method::ALL {
        files.push(format!("report_{m}.json"));
        files.push(format!("samples_{m}.csv"));
        files.push(format!("counterfactuals_{m}.json"));
    }
    for f in &files {
        let x = std::fs::read(a.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(x == y, format!("{f} differs between runs"))?;
    }
    Ok(format!("{} files bit-identical across two runs", files.len()))
}

fn identity_properties(fx: &Fixture) -> Outcome {
    let spec = BoundSpec {
        change_percent: 0.0,
        ..fx.cfg.bounds
    };
    let records = pipeline::generate_counterfactuals(
        Method::BaseShift,
        Some(&fx.cmp.model),
        &fx.cmp.dataset,
        &spec,
        &fx.cfg.search,
    )
    .map_err(|e| e.to_string())?;
    let report =
        pipeline::evaluate_records(&fx.cfg, &fx.cmp.model, &fx.cmp.dataset, &records).map_err(|e| e.to_string())?;
    ensure(
        report.aggregate.proximity == 0.0,
        format!("proximity {}", report.aggregate.proximity),
    )?;
    ensure(
        report.aggregate.compactness == 1.0,
        format!("compactness {}", report.aggregate.compactness),
    )?;

    let model: &dyn ForecastModel = &fx.cmp.model;
    let mut unchanged = 0;
    for w in &fx.cmp.dataset.test {
        let f = model.predict(&w.input).unwrap();
        let band = TrajectoryBounds::new(
            f.iter().map(|v| v - 0.05).collect(),
            f.iter().map(|v| v + 0.05).collect(),
        )
        .unwrap();
        let r = search::generate(model, &w.input, &band, &SearchConfig::default()).map_err(|e| e.to_string())?;
        ensure(
            r.counterfactual == w.input && r.iterations_used == 0 && r.fully_valid,
            "already-valid sample was modified",
        )?;
        unchanged += 1;
    }

    // the default pipeline bounds: every initially-valid window must come back untouched
    for w in &fx.cmp.dataset.test {
        let b = build_bounds(&w.input, w.target.len(), &fx.cfg.bounds).unwrap();
        let f = model.predict(&w.input).unwrap();
        if mask(&f, &b).unwrap().iter().all(|&v| v == 0) {
            let r = search::generate(model, &w.input, &b, &fx.cfg.search).unwrap();
            ensure(
                r.counterfactual == w.input && r.iterations_used == 0,
                "valid sample modified",
            )?;
        }
    }

    Ok(format!(
        "baseshift cp = 0: proximity 0, compactness 1 on {} windows; {unchanged} valid samples unchanged",
        records.len()
    ))
}

struct Fixture {
    cfg: ExperimentConfig,
    cmp: Comparison,
    val_smape: f64,
    elapsed: Duration,
}

fn fixture() -> Result<Fixture, String> {
    let cfg = ExperimentConfig::fixture();
    let start = Instant::now();
    let cmp = pipeline::run_comparison(&cfg, cfg.seed).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let val_smape = pipeline::validation_accuracy(&cfg, &cmp.model, &cmp.dataset)
        .map_err(|e| e.to_string())?
        .smape;
    Ok(Fixture {
        cfg,
        cmp,
        val_smape,
        elapsed,
    })
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 gradient correctness", gradient_correctness()),
        ("2 metric oracles", metric_oracles()),
        ("3 bounds correctness", bounds_correctness()),
    ];
    match fixture() {
        Ok(fx) => {
            results.push(("4 search validity on fixture", search_validity(&fx)));
            results.push(("5 method ranking on fixture", method_ranking(&fx)));
            results.push(("6 ablation trends on fixture", ablation_trends(&fx)));
            results.push(("7 determinism", determinism()));
            results.push(("8 identity properties", identity_properties(&fx)));
        }
        Err(e) => {
            for name in [
                "4 search validity on fixture",
                "5 method ranking on fixture",
                "6 ablation trends on fixture",
                "8 identity properties",
            ] {
                results.push((name, Err(format!("fixture pipeline failed: {e}"))));
            }
            results.push(("7 determinism", determinism()));
        }
    }
    results.sort_by_key(|(name, _)| *name);

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
