//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qlle::graph::{knn, quasi_curvature, Threshold};
use qlle::model_io::{model_to_json, SavedModel};
use qlle::numerics::{pinv, procrustes_error, DEFAULT_RANK_TOL};
use qlle::oos::{elm_map, elm_train, fit_nm_qlle, pca_fit, pca_transform, ElmConfig, NmConfig};
use qlle::parallel::install;
use qlle::qlle::{fit_qlle, QlleConfig};
use qlle::retrieval::report::report_csv;
use qlle::retrieval::{
    precision_at_k, sweep, synth_manifold, ManifoldKind, Method, QlleParams, SweepConfig,
    SynthConfig,
};
use qlle::Matrix;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn within(elapsed: Duration, limit_s: f64, detail: String) -> Outcome {
    let secs = elapsed.as_secs_f64();
    check(secs < limit_s, format!("{detail}; {secs:.2}s (limit {limit_s}s)"))
}

fn lle_reduction() -> Outcome {
    let start = Instant::now();
    let n = 200;
    let mut r = common::rng(101);
    let params: Vec<(f64, f64)> = (0..n)
        .map(|_| (3.0 * r.random::<f64>(), r.random::<f64>()))
        .collect();
    let q = common::gaussian(5, 2, 102).qr().q();
    let x = Matrix::from_fn(n, 5, |i, c| params[i].0 * q[(c, 0)] + params[i].1 * q[(c, 1)]);
    let cfg = QlleConfig::new(8, 2).with_eta(Threshold::Absolute(f64::INFINITY));
    let fit = fit_qlle(&x, &cfg).map_err(|e| e.to_string())?;
    let uniform = fit.embedding.curvature_weights.iter().all(|&c| c == 1.0);
    let oracle = common::plain_lle(&x, 8, cfg.reg, 2);
    let y = common::align_signs(&oracle, &fit.embedding.coords);
    let diff = (y - &oracle).amax();
    if !uniform {
        return Err("curvature weights not uniform on flat input".into());
    }
    check(diff <= 1e-6, format!("max |Y - Y_lle| = {diff:.2e} (tol 1e-6)"))
        .and_then(|m| within(start.elapsed(), 10.0, m))
}

fn curvature_correctness() -> Outcome {
    let start = Instant::now();
    let plane = synth_manifold(&SynthConfig::new(ManifoldKind::Plane, 500, 7).with_ambient_dim(10))
        .map_err(|e| e.to_string())?;
    let g = knn(&plane.dataset.features, 10).map_err(|e| e.to_string())?;
    let g = quasi_curvature(g, &plane.dataset.features, 2).map_err(|e| e.to_string())?;
    let max_c = g.curvatures().into_iter().fold(0.0, f64::max);

    let circle = Matrix::from_fn(8, 2, |i, c| {
        let a = i as f64 * std::f64::consts::TAU / 8.0;
        if c == 0 { a.cos() } else { a.sin() }
    });
    let g = knn(&circle, 4).map_err(|e| e.to_string())?;
    let g = quasi_curvature(g, &circle, 1).map_err(|e| e.to_string())?;
    let min_c = g.curvatures().into_iter().fold(f64::INFINITY, f64::min);
    check(
        max_c <= 1e-8 && min_c > 0.0,
        format!("plane max c_i = {max_c:.2e} (tol 1e-8), circle min c_i = {min_c:.3e} (> 0)"),
    )
    .and_then(|m| within(start.elapsed(), 1.0, m))
}

fn penrose_suite() -> Outcome {
    let mut r = common::rng(303);
    let mut worst: f64 = 0.0;
    let mut deficient = 0;
    for case in 0..50 {
        let m = r.random_range(1..=100);
        let n = r.random_range(1..=60);
        let full = m.min(n);
        let rank = if case % 2 == 0 { full } else { r.random_range(1..=full) };
        if rank < full {
            deficient += 1;
        }
        let a = common::gaussian(m, rank, 1000 + case) * common::gaussian(rank, n, 2000 + case);
        let x = pinv(&a, DEFAULT_RANK_TOL).map_err(|e| e.to_string())?;
        let ax = &a * &x;
        let xa = &x * &a;
        let rel = |e: Matrix, s: f64| e.norm() / s.max(f64::MIN_POSITIVE);
        let errs = [
            rel(&ax * &a - &a, a.norm()),
            rel(&xa * &x - &x, x.norm()),
            rel(ax.transpose() - &ax, ax.norm()),
            rel(xa.transpose() - &xa, xa.norm()),
        ];
        worst = errs.iter().copied().fold(worst, f64::max);
    }
    check(
        worst <= 1e-8,
        format!("50 matrices ({deficient} rank-deficient), worst Penrose residual {worst:.2e} (tol 1e-8)"),
    )
}

fn elm_optimality() -> Outcome {
    let xhat = common::gaussian(50, 10, 404);
    let yhat = common::gaussian(50, 2, 405);
    let model = elm_train(&xhat, &yhat, &ElmConfig::new(200, 9)).map_err(|e| e.to_string())?;
    let h = model.hidden_matrix(&xhat).map_err(|e| e.to_string())?;
    let beta = &model.output_weights;
    let resid = (&h * beta - &yhat).norm();
    let oracle = common::normal_equations_ls(&h, &yhat);
    let beta_err = (beta - &oracle).norm() / oracle.norm();
    let mut r = common::rng(406);
    let mut worst_gain = f64::NEG_INFINITY;
    for _ in 0..100 {
        let mut delta = Matrix::from_fn(beta.nrows(), beta.ncols(), |_, _| r.random::<f64>() - 0.5);
        delta *= 1e-3 / delta.norm();
        let perturbed = (&h * (beta + delta) - &yhat).norm();
        worst_gain = worst_gain.max(resid - perturbed);
    }
    let ok = resid <= 1e-6 * yhat.norm() && beta_err <= 1e-6 && worst_gain <= 1e-9;
    check(
        ok,
        format!(
            "residual/||Y|| = {:.2e}, beta vs normal equations = {beta_err:.2e}, best perturbation gain = {worst_gain:.2e}",
            resid / yhat.norm()
        ),
    )
}

fn planar_recovery() -> Outcome {
    let start = Instant::now();
    let plane = synth_manifold(&SynthConfig::new(ManifoldKind::Plane, 500, 11).with_ambient_dim(10))
        .map_err(|e| e.to_string())?;
    // the planar error grows linearly with reg (about 90·reg at k=10), so use a small one
    let cfg = QlleConfig::new(10, 2).with_reg(1e-7);
    let fit = fit_qlle(&plane.dataset.features, &cfg).map_err(|e| e.to_string())?;
    let err = procrustes_error(&plane.ground_truth, &fit.embedding.coords).map_err(|e| e.to_string())?;
    check(err <= 1e-3, format!("procrustes error {err:.2e} at reg 1e-7 (tol 1e-3)"))
        .and_then(|m| within(start.elapsed(), 30.0, m))
}

fn roll_model(n: usize, seed: u64) -> Result<(Matrix, qlle::NmQlleModel, QlleConfig), String> {
    let roll = synth_manifold(&SynthConfig::new(ManifoldKind::SwissRoll, n, seed)).map_err(|e| e.to_string())?;
    let cfg = QlleConfig::new(10, 2);
    let nm = NmConfig::new(300, 1000, seed);
    let model = fit_nm_qlle(&roll.dataset.features, &cfg, &nm).map_err(|e| e.to_string())?;
    Ok((roll.dataset.features, model, cfg))
}

fn out_of_sample_fidelity() -> Outcome {
    let start = Instant::now();
    let (x, model, cfg) = roll_model(2000, 21)?;
    let held: Vec<usize> = (0..x.nrows())
        .filter(|i| model.landmark_indices.binary_search(i).is_err())
        .collect();
    let mapped = elm_map(&model.elm, &x.select_rows(&held)).map_err(|e| e.to_string())?;
    let reference = fit_qlle(&x, &cfg).map_err(|e| e.to_string())?;
    let reference = reference.embedding.coords.select_rows(&held);
    let err = procrustes_error(&reference, &mapped).map_err(|e| e.to_string())?;
    check(
        err <= 0.15,
        format!("{} held-out points, procrustes error {err:.4} (tol 0.15)", held.len()),
    )
    .and_then(|m| within(start.elapsed(), 120.0, m))
}

fn retrieval_oracle() -> Outcome {
    let mut r = common::rng(707);
    for case in 0..10u64 {
        let y = common::gaussian(30, 3, 7000 + case);
        let labels: Vec<usize> = (0..30).map(|_| r.random_range(0..3)).collect();
        let returns = r.random_range(1..30);
        let got = precision_at_k(&y, &labels, returns).map_err(|e| e.to_string())?;
        let (mean, per) = common::brute_precision(&y, &labels, returns);
        if got.per_query != per || got.mean != mean {
            return Err(format!("instance {case} (returns={returns}) differs from the oracle"));
        }
    }
    Ok("10 random 30-sample instances match the exhaustive oracle exactly".into())
}

fn min_time<T>(reps: usize, mut f: impl FnMut() -> T) -> f64 {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(f());
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn relative_timing() -> Outcome {
    let (x, model, cfg) = roll_model(2000, 31)?;
    let held: Vec<usize> = (0..x.nrows())
        .filter(|i| model.landmark_indices.binary_search(i).is_err())
        .take(200)
        .collect();
    let map_per_query = min_time(3, || {
        for &i in &held {
            elm_map(&model.elm, &x.select_rows(&[i])).unwrap();
        }
    }) / held.len() as f64;
    let mut refit_total = 0.0;
    for &i in held.iter().take(3) {
        let mut rows = model.landmark_indices.clone();
        rows.push(i);
        let sub = x.select_rows(&rows);
        refit_total += min_time(1, || fit_qlle(&sub, &cfg).unwrap());
    }
    let refit_per_query = refit_total / 3.0;
    let speedup = refit_per_query / map_per_query;

    let wide = synth_manifold(&SynthConfig::new(ManifoldKind::SwissRoll, 2000, 32).with_ambient_dim(50))
        .map_err(|e| e.to_string())?;
    let ds = &wide.dataset;
    let pca = pca_fit(&ds.features, 2).map_err(|e| e.to_string())?;
    let low = pca_transform(&pca, &ds.features).map_err(|e| e.to_string())?;
    let t_low = min_time(3, || precision_at_k(&low, &ds.labels, 20).unwrap());
    let t_full = min_time(3, || precision_at_k(&ds.features, &ds.labels, 20).unwrap());
    check(
        speedup >= 10.0 && t_low < t_full,
        format!(
            "map {:.3} ms/query vs refit {:.1} ms/query ({speedup:.0}x, need 10x); ranking d=2 {:.1} ms vs D=50 {:.1} ms",
            map_per_query * 1e3,
            refit_per_query * 1e3,
            t_low * 1e3,
            t_full * 1e3
        ),
    )
}

fn determinism() -> Outcome {
    let roll = synth_manifold(&SynthConfig::new(ManifoldKind::SwissRoll, 600, 41).with_noise(0.05))
        .map_err(|e| e.to_string())?;
    let again = synth_manifold(&SynthConfig::new(ManifoldKind::SwissRoll, 600, 41).with_noise(0.05))
        .map_err(|e| e.to_string())?;
    if roll.dataset != again.dataset {
        return Err("synth rerun differs".into());
    }
    let x = &roll.dataset.features;
    let cfg = QlleConfig::new(10, 2);
    let nm = NmConfig::new(200, 300, 5);
    let fit_json = |threads| {
        install(threads, || {
            let m = fit_nm_qlle(x, &cfg, &nm).unwrap();
            model_to_json(&SavedModel::NmQlle(m)).unwrap()
        })
    };
    let a = fit_json(None);
    if a != fit_json(None) || a != fit_json(Some(1)) {
        return Err("model serialization differs across reruns".into());
    }
    let sweep_cfg = SweepConfig {
        qlle: QlleParams::default(),
        nm,
        returns: 10,
        record_timing: false,
    };
    let report = |threads| {
        install(threads, || {
            let reports: Vec<_> = [Method::NmQlle, Method::Pca]
                .into_iter()
                .map(|m| sweep(&roll.dataset, m, &[2, 3], &sweep_cfg))
                .collect();
            report_csv(&reports).unwrap()
        })
    };
    let r = report(None);
    check(
        r == report(None) && r == report(Some(1)),
        "synth, model JSON and sweep CSV identical across reruns and thread counts".into(),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("classical LLE reduction", lle_reduction),
        ("curvature correctness", curvature_correctness),
        ("Penrose suite", penrose_suite),
        ("ELM optimality", elm_optimality),
        ("planar recovery", planar_recovery),
        ("out-of-sample fidelity", out_of_sample_fidelity),
        ("retrieval oracle equivalence", retrieval_oracle),
        ("relative timing", relative_timing),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        match outcome {
            Ok(m) => println!("PASS {id} {name}: {m}"),
            Err(m) => {
                failed += 1;
                println!("FAIL {id} {name}: {m}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
