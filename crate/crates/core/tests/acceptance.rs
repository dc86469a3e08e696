//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so every line is printed even when all checks pass.

mod common;

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::Rng;

use common::{golden, normal_matrix, normals, random_tree, rel_err, rng, toy, toy_dir};
use hts_core::dataset::{ingest_csv, split, SplitSpec};
use hts_core::evaluate::{mase, AccuracyTable};
use hts_core::features::{compute_features, crossing_points, flat_spots, lumpiness, pca, stability};
use hts_core::forecasters::ets::{ErrorType, SeasonType, TrendType};
use hts_core::forecasters::{
    fit_arima_order, forecast_base, forecast_ets, forecast_naive, ArimaLimits, ArimaOrder, BaseMethod, EtsModel,
    EtsParams, EtsSpec, EtsState, ModelConfig,
};
use hts_core::hierarchy::{build_summing_matrix, check_coherence, HierarchySpec, SummingMatrix};
use hts_core::reconcile::{
    bottom_up, estimate_w, mint_reconcile, shrinkage_lambda, top_down, WeightKind, WeightSpec,
};
use hts_core::runner::run_temporal;
use hts_core::temporal::thief_forecast;
use hts_core::Error;

type Outcome = Result<String, String>;

const SKIP: &str = "SKIP";

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Residuals for a hierarchy of `m` rows: a common factor plus noise, so
/// every estimator has a well conditioned, non-diagonal input.
fn residuals(r: &mut rand_chacha::ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    let common = normals(r, n);
    let noise = normal_matrix(r, n, m);
    DMatrix::from_fn(n, m, |t, j| 0.5 * common[t] + noise[(t, j)] * (1.0 + j as f64 % 3.0))
}

fn weights(s: &SummingMatrix, kind: WeightKind, e: &DMatrix<f64>) -> Result<WeightSpec, String> {
    estimate_w(e, s, kind).map_err(|err| format!("{kind}: {err}"))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    let mut checks = 0;
    for _ in 0..200 {
        let h = random_tree(&mut r, 64);
        let s = build_summing_matrix(&h);
        let m = s.n_rows();
        let steps = r.gen_range(1..=8);
        let base = normal_matrix(&mut r, steps, m) * 100.0;
        let e = residuals(&mut r, m + 20, m);
        let mut props: Vec<f64> = (0..s.n_bottom()).map(|_| r.gen_range(0.01..1.0)).collect();
        let total: f64 = props.iter().sum();
        props.iter_mut().for_each(|p| *p /= total);
        let mut outputs = vec![
            bottom_up(&s, &base).map_err(|e| e.to_string())?,
            top_down(&s, &base.column(0).iter().copied().collect::<Vec<_>>(), &props).map_err(|e| e.to_string())?,
        ];
        for kind in WeightKind::ALL {
            let w = weights(&s, kind, &e)?;
            outputs.push(mint_reconcile(&s, &w, &base).map_err(|e| e.to_string())?);
        }
        ensure!(outputs.len() == 7, "expected 7 methods, ran {}", outputs.len());
        for out in &outputs {
            let rep = check_coherence(&out.point, &s, 1e-8).map_err(|e| e.to_string())?;
            if let Some(w) = rep.worst() {
                worst = worst.max(w.relative);
            }
            ensure!(rep.passed(), "{:?} incoherent: {:?}", out.method, rep.worst());
            checks += 1;
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(30), "took {took:?}");
    Ok(format!("{checks} reconciliations, worst relative gap {worst:.1e}, {:.2}s", took.as_secs_f64()))
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn criterion_2() -> Outcome {
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner(100).run(&(0u64..u64::MAX, 2usize..=24), |(seed, leaves)| {
        let mut r = rng(seed);
        let s = build_summing_matrix(&random_tree(&mut r, leaves));
        let m = s.n_rows();
        let bottom = normal_matrix(&mut r, 3, s.n_bottom()) * 50.0;
        let coherent = bottom * s.matrix().transpose();
        let e = residuals(&mut r, m + 15, m);
        for kind in WeightKind::ALL {
            let w = estimate_w(&e, &s, kind).map_err(|err| TestCaseError::fail(err.to_string()))?;
            let out = mint_reconcile(&s, &w, &coherent).map_err(|err| TestCaseError::fail(err.to_string()))?;
            for (a, b) in out.point.iter().zip(coherent.iter()) {
                let d = rel_err(*a, *b);
                worst.set(worst.get().max(d));
                if d > 1e-9 {
                    return Err(TestCaseError::fail(format!("{kind}: {a} vs {b}")));
                }
            }
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok(format!("100 cases x 5 weight kinds, worst deviation {:.1e}", worst.get()))
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s = build_summing_matrix(&random_tree(&mut r, 32));
        let m = s.n_rows();
        let base = normal_matrix(&mut r, 4, m) * 10.0;
        let e = residuals(&mut r, m + 15, m);
        let c = 10f64.powf(r.gen_range(-3.0..=3.0));
        for kind in WeightKind::ALL {
            let w = weights(&s, kind, &e)?;
            let scaled = WeightSpec::from_matrix(kind, &w.matrix * c, w.lambda).map_err(|e| e.to_string())?;
            let a = mint_reconcile(&s, &w, &base).map_err(|e| e.to_string())?;
            let b = mint_reconcile(&s, &scaled, &base).map_err(|e| e.to_string())?;
            for (x, y) in a.point.iter().zip(b.point.iter()) {
                let d = rel_err(*x, *y);
                worst = worst.max(d);
                ensure!(d <= 1e-10, "{kind} with c={c}: {x} vs {y}");
            }
        }
    }
    Ok(format!("100 trees x 5 weight kinds, worst deviation {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    for _ in 0..300 {
        let n = r.gen_range(3..60);
        let m = r.gen_range(2..12);
        let mut e = normal_matrix(&mut r, n, m);
        if r.gen_bool(0.5) {
            let f = normals(&mut r, n);
            let load: f64 = r.gen_range(0.0..5.0);
            for t in 0..n {
                for j in 0..m {
                    e[(t, j)] += load * f[t];
                }
            }
        }
        let l = shrinkage_lambda(&e).map_err(|e| e.to_string())?;
        ensure!((0.0..=1.0).contains(&l), "lambda {l} out of range");
    }
    // e_t = ±v: every cross product is the same at every t
    let v = [1.0, -2.0, 0.5, 3.0];
    let flat = DMatrix::from_fn(40, 4, |t, j| if t % 2 == 0 { v[j] } else { -v[j] });
    let l0 = shrinkage_lambda(&flat).map_err(|e| e.to_string())?;
    ensure!(l0 == 0.0, "constant-product lambda {l0}");
    let indep = normal_matrix(&mut rng(2024), 200, 5);
    let li = shrinkage_lambda(&indep).map_err(|e| e.to_string())?;
    ensure!(li >= 0.6, "independent lambda {li}");
    Ok(format!("range ok on 300 draws, constant products 0, independent {li:.3}"))
}

/// Short reference implementation of MASE.
fn mase_reference(actual: &[f64], forecast: &[f64], train: &[f64], m: usize) -> f64 {
    let mae: f64 = actual.iter().zip(forecast).map(|(a, f)| (a - f).abs()).sum::<f64>() / actual.len() as f64;
    let diffs: Vec<f64> = train.windows(m + 1).map(|w| (w[m] - w[0]).abs()).collect();
    let q = diffs.iter().sum::<f64>() / diffs.len() as f64;
    mae / q
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = *[1usize, 2, 4, 12, 52].get(r.gen_range(0..5)).unwrap();
        let t = m + r.gen_range(2..200);
        let h = r.gen_range(1..60);
        let train: Vec<f64> = (0..t).map(|_| r.gen_range(0.0..100.0)).collect();
        let actual: Vec<f64> = (0..h).map(|_| r.gen_range(0.0..100.0)).collect();
        let fc: Vec<f64> = (0..h).map(|_| r.gen_range(0.0..100.0)).collect();
        let got = mase(&actual, &fc, &train, m).map_err(|e| e.to_string())?;
        let want = mase_reference(&actual, &fc, &train, m);
        let d = rel_err(got, want);
        worst = worst.max(d);
        ensure!(d <= 1e-12, "{got} vs {want}");
    }
    let hand = mase(&[5.5, 6.5], &[5.0, 7.0], &[1.0, 2.0, 3.0, 4.0], 1).map_err(|e| e.to_string())?;
    ensure!(hand == 0.5, "hand case gave {hand}");
    Ok(format!("50 instances, worst deviation {worst:.1e}; hand case 0.5"))
}

fn criterion_6() -> Outcome {
    let Ok(path) = std::env::var("HTS_DENGUE_DATA") else {
        return Err(SKIP.into());
    };
    let h = HierarchySpec::sri_lanka();
    let frame = ingest_csv(&path, &h, 52).map_err(|e| e.to_string())?;
    let splits = SplitSpec::sri_lanka();
    let expected = [
        ("TS1", BaseMethod::Average, 0.90),
        ("TS1", BaseMethod::SeasonalNaive, 2.14),
        ("TS1", BaseMethod::Naive, 4.07),
        ("TS2", BaseMethod::Average, 0.64),
    ];
    let mut got = Vec::new();
    for (name, method, want) in expected {
        let spec = splits.iter().find(|s| s.name == name).ok_or("missing split")?;
        let (train, test) = split(&frame, spec).map_err(|e| e.to_string())?;
        let y = train.column("SL").ok_or("no SL column")?;
        let actual = test.column("SL").ok_or("no SL column")?;
        let b = forecast_base(method, &y, actual.len(), 52, &ModelConfig::default()).map_err(|e| e.to_string())?;
        let v = mase(&actual, &b.point, &y, 52).map_err(|e| e.to_string())?;
        ensure!((v - want).abs() <= 0.01, "{name} {method}: {v:.4} vs {want}");
        got.push(format!("{name}/{method}={v:.2}"));
    }
    Ok(got.join(" "))
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let t = r.gen_range(3..200);
        let y: Vec<f64> = (0..t).map(|_| r.gen_range(-50.0..50.0)).collect();
        let alpha = r.gen_range(0.01..1.0);
        let l0 = r.gen_range(-20.0..20.0);
        let spec = EtsSpec::new(ErrorType::Additive, TrendType::None, SeasonType::None);
        let model = EtsModel::from_parts(spec, 1, EtsParams::level_only(alpha), EtsState::level(l0), &y)
            .map_err(|e| e.to_string())?;
        let mut level = l0;
        for (i, &obs) in y.iter().enumerate() {
            let d = (model.fitted()[i] - level).abs();
            worst = worst.max(d);
            ensure!(d <= 1e-10, "fitted[{i}] {} vs {level}", model.fitted()[i]);
            level += alpha * (obs - level);
        }
        let fc = model.forecast(3);
        ensure!(fc.iter().all(|f| (f - level).abs() <= 1e-10), "forecast {fc:?} vs {level}");
    }
    let y: Vec<f64> = (0..40).map(|_| r.gen_range(0.0..10.0)).collect();
    let spec = EtsSpec::ann();
    let model = EtsModel::from_parts(spec, 1, EtsParams::level_only(1.0), EtsState::level(y[0]), &y)
        .map_err(|e| e.to_string())?;
    let ets = forecast_ets(&model, &y, 6).map_err(|e| e.to_string())?;
    let naive = forecast_naive(&y, 6).map_err(|e| e.to_string())?;
    ensure!(ets.point == naive.point, "alpha=1 {:?} vs naive {:?}", ets.point, naive.point);
    ensure!(
        ets.fitted[1..] == naive.fitted[1..],
        "alpha=1 fitted values differ from lagged observations"
    );
    Ok(format!("recursion worst deviation {worst:.1e}; alpha=1 equals naive"))
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let eps = normals(&mut r, 600);
    let mut y = vec![0.0; 600];
    for t in 1..600 {
        y[t] = 0.7 * y[t - 1] + eps[t];
    }
    let y = &y[100..];
    let limits = ArimaLimits::default();
    let model = fit_arima_order(y, ArimaOrder::new(1, 0, 0), true, &limits).map_err(|e| e.to_string())?;
    let phi = model.ar()[0];
    ensure!((phi - 0.7).abs() <= 0.1, "phi {phi}");

    let walk: Vec<f64> = eps.iter().scan(10.0, |s, e| {
        *s += e;
        Some(*s)
    }).take(120).collect();
    let rw = fit_arima_order(&walk, ArimaOrder::new(0, 1, 0), false, &limits).map_err(|e| e.to_string())?;
    let fc = rw.forecast(&walk, 10).map_err(|e| e.to_string())?;
    let naive = forecast_naive(&walk, 10).map_err(|e| e.to_string())?;
    ensure!(fc == naive.point, "(0,1,0) {fc:?} vs naive {:?}", naive.point);
    Ok(format!("phi_hat {phi:.4}; (0,1,0) equals naive"))
}

fn criterion_9() -> Outcome {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = toy_dir();
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_hts"))
        .arg("evaluate")
        .arg("--config")
        .arg(dir.join("config.txt"))
        .arg("--data")
        .arg(dir.join("data.csv"))
        .arg("--hierarchy")
        .arg(dir.join("hierarchy.csv"))
        .arg("--splits")
        .arg(dir.join("splits.csv"))
        .arg("--out")
        .arg(out.path())
        .output()
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure!(status.status.success(), "evaluate failed: {}", String::from_utf8_lossy(&status.stderr));
    ensure!(took < Duration::from_secs(10), "evaluate took {took:?}");
    let read = |p: std::path::PathBuf| fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()));

    let long = read(out.path().join("accuracy_long.csv"))?;
    let table = AccuracyTable::read_long(long.as_bytes()).map_err(|e| e.to_string())?;
    let mut baselines = AccuracyTable::new();
    for rec in &table.records {
        if ["avg", "nve", "snv"].contains(&rec.method.as_str()) {
            baselines.push(&rec.split, &rec.granularity, &rec.node, &rec.method, rec.mase.clone());
        }
    }
    ensure!(
        baselines.to_long_string(&[]) == read(golden("toy_baselines.csv"))?,
        "avg/nve/snv cells differ from the oracle golden"
    );
    ensure!(long == read(golden("toy_accuracy_long.csv"))?, "accuracy_long.csv differs from golden");
    ensure!(
        read(out.path().join("accuracy_wide.csv"))? == read(golden("toy_accuracy_wide.csv"))?,
        "accuracy_wide.csv differs from golden"
    );
    Ok(format!("{} cells match, {:.2}s", table.len(), took.as_secs_f64()))
}

fn criterion_10() -> Outcome {
    let t = toy();
    let spec = &t.splits[0];
    let (train, _) = split(&t.frame, spec).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut runs = 0;
    let mut rank_skips = 0;
    for node in t.hierarchy.row_order() {
        let y = train.column(&node).ok_or("missing node")?;
        for method in BaseMethod::ALL {
            for kind in WeightKind::ALL {
                let f = match thief_forecast(&y, t.config.period, method, kind, &t.config.models) {
                    Ok(f) => f,
                    // 9 cycles cannot support a full 28 x 28 covariance
                    Err(Error::Rank(_)) if kind == WeightKind::SampleCov => {
                        rank_skips += 1;
                        continue;
                    }
                    Err(e) => return Err(format!("{node} {method} {kind}: {e}")),
                };
                let annual = f.level(t.config.period).ok_or("no annual level")?.reconciled[0];
                for level in &f.levels {
                    let sum: f64 = level.reconciled.iter().sum();
                    let d = rel_err(sum, annual);
                    worst = worst.max(d);
                    ensure!(d <= 1e-8, "{node} {method} {kind} k={}: {sum} vs {annual}", level.factor);
                }
                runs += 1;
            }
        }
    }
    // long enough history for the full covariance
    let mut r = rng(10);
    let noise = normals(&mut r, 40 * 12);
    let long: Vec<f64> = noise.iter().enumerate().map(|(i, e)| 50.0 + 10.0 * ((i % 12) as f64 / 2.0).sin() + 3.0 * e).collect();
    for method in BaseMethod::ALL {
        let f = thief_forecast(&long, 12, method, WeightKind::SampleCov, &t.config.models)
            .map_err(|e| format!("40-cycle {method} cov: {e}"))?;
        let annual = f.level(12).ok_or("no annual level")?.reconciled[0];
        for level in &f.levels {
            let sum: f64 = level.reconciled.iter().sum();
            ensure!(rel_err(sum, annual) <= 1e-8, "40-cycle {method} cov k={}: {sum} vs {annual}", level.factor);
        }
    }
    let report = run_temporal(&t.frame, "Total", spec, &t.config).map_err(|e| e.to_string())?;
    let wide = report.to_wide_string(Some(2), &[]);
    let rows: Vec<&str> = wide.lines().skip(1).map(|l| l.split(',').nth(1).unwrap_or("")).collect();
    let want = ["Annual", "Semi-annual", "Quarterly", "Monthly", "Bi-Weekly", "Weekly"];
    ensure!(rows == want, "report rows {rows:?}");
    Ok(format!(
        "{runs} temporal fits, worst gap {worst:.1e}, {rank_skips} cov fits rank deficient; six report rows"
    ))
}

fn criterion_11() -> Outcome {
    let mut r = rng(11);
    for i in 0..1000 {
        let m = [1usize, 4, 12][i % 3];
        let t = r.gen_range((3 * m).max(12)..150);
        let trend = r.gen_range(-1.0..1.0);
        let season = r.gen_range(0.0..5.0);
        let y: Vec<f64> = (0..t)
            .map(|k| {
                trend * k as f64
                    + season * (2.0 * std::f64::consts::PI * k as f64 / m.max(2) as f64).sin()
                    + r.gen_range(-3.0..3.0)
            })
            .collect();
        let f = compute_features(&y, m).map_err(|e| e.to_string())?;
        for name in ["trend_strength", "seasonal_strength"] {
            if let Some(v) = f.get(name) {
                ensure!((0.0..=1.0).contains(&v), "series {i}: {name} = {v}");
            }
        }
        let width = if m == 1 { 10 } else { m };
        let a = r.gen_range(0.1..10.0);
        let b = r.gen_range(-100.0..100.0);
        let ay: Vec<f64> = y.iter().map(|v| a * v).collect();
        let affine: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        if let (Some(s1), Some(s2)) = (stability(&y, width), stability(&ay, width)) {
            ensure!(rel_err(s2, a * a * s1) <= 1e-8, "series {i}: stability {s2} vs {}", a * a * s1);
        }
        if let (Some(l1), Some(l2)) = (lumpiness(&y, width), lumpiness(&ay, width)) {
            ensure!(rel_err(l2, a.powi(4) * l1) <= 1e-8, "series {i}: lumpiness {l2} vs {}", a.powi(4) * l1);
        }
        ensure!(crossing_points(&y) == crossing_points(&affine), "series {i}: crossing points changed");
        ensure!(flat_spots(&y) == flat_spots(&affine), "series {i}: flat spots changed");
    }
    let c = vec![3.0; 40];
    ensure!(flat_spots(&c) == 40, "constant flat_spots {}", flat_spots(&c));
    ensure!(stability(&c, 10) == Some(0.0), "constant stability");
    ensure!(lumpiness(&c, 10) == Some(0.0), "constant lumpiness");
    Ok("1000 series".into())
}

fn criterion_12() -> Outcome {
    let mut r = rng(12);
    for _ in 0..50 {
        let n = r.gen_range(10..80);
        let p = r.gen_range(2..10);
        let mut x = normal_matrix(&mut r, n, p);
        let f = normals(&mut r, n);
        for i in 0..n {
            for j in 0..p {
                x[(i, j)] += f[i] * j as f64 * 0.3;
            }
        }
        let res = pca(&x).map_err(|e| e.to_string())?;
        let gram = &res.loadings * res.loadings.transpose();
        let id = DMatrix::<f64>::identity(gram.nrows(), gram.ncols());
        ensure!((gram - id).amax() <= 1e-8, "loadings not orthonormal");
        let ev = &res.explained_variance_ratio;
        ensure!(ev.windows(2).all(|w| w[0] >= w[1]), "ratios increase: {ev:?}");
        ensure!(ev.iter().all(|v| (0.0..=1.0).contains(v)), "ratio out of range: {ev:?}");
    }
    let base = normals(&mut r, 30);
    let rank1 = DMatrix::from_fn(30, 2, |i, j| if j == 0 { base[i] } else { 3.0 * base[i] + 1.0 });
    let res = pca(&rank1).map_err(|e| e.to_string())?;
    let ev = &res.explained_variance_ratio;
    ensure!((ev[0] - 1.0).abs() <= 1e-10 && ev[1].abs() <= 1e-10, "rank-1 ratios {ev:?}");
    let iso = normal_matrix(&mut rng(1000), 1000, 2);
    let res = pca(&iso).map_err(|e| e.to_string())?;
    let ev = &res.explained_variance_ratio;
    ensure!(ev.iter().all(|v| (v - 0.5).abs() <= 0.05), "isotropic ratios {ev:?}");
    Ok(format!("isotropic ratios {:.3}/{:.3}", ev[0], ev[1]))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("coherence of all reconciliation methods on random trees", criterion_1),
        ("coherent inputs are fixed points of MinT", criterion_2),
        ("MinT invariant to scaling of W", criterion_3),
        ("shrinkage intensity", criterion_4),
        ("MASE against reference implementation", criterion_5),
        ("dengue golden values", criterion_6),
        ("ETS level recursion and alpha=1 limit", criterion_7),
        ("ARIMA AR(1) recovery and random walk", criterion_8),
        ("toy evaluate run against golden files", criterion_9),
        ("temporal coherence and report rows", criterion_10),
        ("feature invariants", criterion_11),
        ("PCA properties", criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        match check() {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(e) if e == SKIP => println!(
                "criterion {n:>2} SKIP  {name}: HTS_DENGUE_DATA not set; covered by the toy golden files of criterion 9"
            ),
            Err(e) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {e}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
