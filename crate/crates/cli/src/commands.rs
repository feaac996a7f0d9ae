use std::path::Path;
use std::time::Instant;

use qlle::graph;
use qlle::model_io::{load_model, save_model, SavedModel};
use qlle::oos::{fit_nm_qlle, pca_fit};
use qlle::retrieval::report::ReportFormat;
use qlle::retrieval::{
    export_report, load_features, save_features, sweep as run_sweep, synth_manifold, FeatureFormat, LabeledDataset,
    ManifoldKind, Method, SynthConfig,
};
use qlle::Matrix;

use crate::config::{DataFormat, RunConfig};
use crate::CliError;

fn at_path(path: &Path) -> impl FnOnce(qlle::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn load(path: &Path, format: FeatureFormat) -> Result<LabeledDataset, CliError> {
    load_features(path, format).map_err(at_path(path))
}

fn check_landmarks(landmarks: usize, k: usize, n: usize) -> Result<(), CliError> {
    if landmarks > n {
        return Err(CliError::Usage(format!("--landmarks {landmarks} exceeds the {n} samples in the data")));
    }
    if landmarks <= k {
        return Err(CliError::Usage(format!("--landmarks {landmarks} must exceed k={k}")));
    }
    Ok(())
}

/// Retained-neighbor counts of the pruned graph QLLE builds on `x`.
fn retained_counts(x: &Matrix, cfg: &qlle::QlleConfig) -> Result<(Vec<usize>, f64), CliError> {
    let g = graph::knn(x, cfg.k)?;
    let g = graph::quasi_curvature(g, x, cfg.d)?;
    let eta = cfg.eta.resolve(&g)?;
    Ok((graph::prune(&g, eta, cfg.min_k).retained_counts(), eta))
}

pub fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let method = cfg.single_method()?;
    let dims = cfg.dims()?;
    let &[d] = dims.as_slice() else {
        return Err(CliError::Usage("fit takes a single --d".into()));
    };
    let out = cfg.out_path()?;
    let data = cfg.data_path()?;
    let ds = load(data, cfg.data_format()?)?;
    if d > ds.dim() {
        return Err(CliError::Usage(format!("d={d} exceeds the feature dimension {}", ds.dim())));
    }

    let start = Instant::now();
    let model = match method {
        Method::NmQlle => {
            let qcfg = cfg.qlle_config(d)?;
            let nm = cfg.nm_config()?;
            check_landmarks(nm.landmarks, qcfg.k, ds.len())?;
            let model = fit_nm_qlle(&ds.features, &qcfg, &nm)?;
            let elapsed = start.elapsed().as_secs_f64();
            let (counts, eta) = retained_counts(&model.landmark_features, &qcfg)?;
            let min = counts.iter().min().copied().unwrap_or(0);
            let max = counts.iter().max().copied().unwrap_or(0);
            let mean = counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64;
            println!("method: nm_qlle");
            println!("samples: {}  dim: {}", ds.len(), ds.dim());
            println!("landmarks (P): {} ({})", nm.landmarks, nm.selection.name());
            println!("d: {d}  hidden: {}", nm.elm.hidden);
            println!("k_i: min {min}  mean {mean:.2}  max {max}  (k={}, eta={eta:.6})", qcfg.k);
            println!("fit time: {elapsed:.3} s");
            SavedModel::NmQlle(model)
        }
        Method::Pca => {
            let model = pca_fit(&ds.features, d)?;
            println!("method: pca");
            println!("samples: {}  dim: {}", ds.len(), ds.dim());
            println!("d: {d}");
            println!("fit time: {:.3} s", start.elapsed().as_secs_f64());
            SavedModel::Pca(model)
        }
        other => {
            return Err(CliError::Usage(format!(
                "fit supports nm_qlle and pca, not {other} (it has no out-of-sample map)"
            )))
        }
    };
    save_model(&model, out).map_err(at_path(out))?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn transform(model_path: &Path, data: &Path, format: Option<DataFormat>, out: &Path) -> Result<(), CliError> {
    let model = load_model(model_path).map_err(at_path(model_path))?;
    let format = match format {
        Some(DataFormat::Csv) => FeatureFormat::Csv,
        Some(DataFormat::F32bin) => FeatureFormat::F32Bin,
        None => FeatureFormat::from_path(data),
    };
    let ds = load(data, format)?;
    if ds.dim() != model.input_dim() {
        return Err(CliError::Usage(format!(
            "{} has {} features but the model expects {}",
            data.display(),
            ds.dim(),
            model.input_dim()
        )));
    }
    let coords = model.transform(&ds.features)?;
    let embedded = LabeledDataset::new(ds.name.clone(), coords, &ds.raw_labels())?;
    save_features(&embedded, out, FeatureFormat::from_path(out)).map_err(at_path(out))?;
    println!("embedded {} samples into {} dimensions, wrote {}", ds.len(), model.output_dim(), out.display());
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let methods = cfg.method_list()?;
    let dims = cfg.dims()?;
    let sweep_cfg = cfg.sweep_config()?;
    let out = cfg.out_path()?;
    let ds = load(cfg.data_path()?, cfg.data_format()?)?;
    if sweep_cfg.returns >= ds.len() {
        return Err(CliError::Usage(format!(
            "--returns {} needs more than {} samples",
            sweep_cfg.returns,
            ds.len()
        )));
    }
    if methods.contains(&Method::NmQlle) {
        check_landmarks(sweep_cfg.nm.landmarks, sweep_cfg.qlle.k, ds.len())?;
    }

    let mut reports = Vec::with_capacity(methods.len());
    for method in methods {
        let report = run_sweep(&ds, method, &dims, &sweep_cfg);
        for r in &report.records {
            match (&r.mean_precision, &r.error) {
                (Some(p), _) => eprintln!("{method} d={}: precision {p:.4}", r.d),
                (None, Some(e)) => eprintln!("{method} d={}: failed: {e}", r.d),
                (None, None) => eprintln!("{method} d={}: failed", r.d),
            }
        }
        match &report.summary {
            Some(s) => println!(
                "{method}: mean precision {:.4}  max precision {:.4}  mean query {:.4} ms  ({}/{} dims)",
                s.mean_precision,
                s.max_precision,
                s.mean_query_ms,
                report.succeeded(),
                report.records.len()
            ),
            None => println!("{method}: every dimension failed"),
        }
        reports.push(report);
    }
    export_report(&reports, out, ReportFormat::from_path(out)).map_err(at_path(out))?;
    println!("wrote {}", out.display());
    if reports.iter().all(|r| r.succeeded() == 0) {
        return Err(CliError::Compute("no dimension succeeded for any method".into()));
    }
    Ok(())
}

pub fn synth(kind: &str, n: usize, noise: f64, seed: u64, ambient_dim: Option<usize>, out: &Path) -> Result<(), CliError> {
    let kind: ManifoldKind = kind.parse().map_err(|e: qlle::Error| CliError::Usage(e.to_string()))?;
    let mut cfg = SynthConfig::new(kind, n, seed).with_noise(noise);
    cfg.ambient_dim = ambient_dim;
    let s = synth_manifold(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    save_features(&s.dataset, out, FeatureFormat::from_path(out)).map_err(at_path(out))?;
    println!(
        "wrote {} ({} samples, {} dims, {} classes)",
        out.display(),
        s.dataset.len(),
        s.dataset.dim(),
        s.dataset.class_count()
    );
    Ok(())
}
