mod common;

use qlle::graph::Threshold;
use qlle::model_io::{load_model, model_from_json, model_to_json, save_model, SavedModel};
use qlle::oos::{fit_nm_qlle, pca_fit, LandmarkSelection};
use qlle::retrieval::{synth_manifold, ManifoldKind, SynthConfig};
use qlle::{NmConfig, QlleConfig};

#[test]
fn nm_qlle_model_round_trips_exactly() {
    let s = synth_manifold(&SynthConfig::new(ManifoldKind::SwissRoll, 300, 31)).unwrap();
    let x = &s.dataset.features;
    let mut nm = NmConfig::new(120, 200, 31);
    nm.selection = LandmarkSelection::KMeans { iters: 10 };
    nm.elm = nm.elm.with_ridge(1e-6);
    let cfg = QlleConfig::new(9, 2).with_eta(Threshold::Absolute(f64::INFINITY)).with_reg(1e-4);
    let model = SavedModel::NmQlle(fit_nm_qlle(x, &cfg, &nm).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.kind(), "nm_qlle");
    assert_eq!((back.input_dim(), back.output_dim()), (3, 2));
    assert_eq!(back.transform(x).unwrap(), model.transform(x).unwrap());
}

#[test]
fn pca_model_transforms_identically_after_reload() {
    let x = common::gaussian(50, 6, 32);
    let model = SavedModel::Pca(pca_fit(&x, 3).unwrap());
    let back = model_from_json(&model_to_json(&model).unwrap()).unwrap();
    assert_eq!(back.transform(&x).unwrap(), model.transform(&x).unwrap());
}

#[test]
fn rejects_foreign_documents() {
    assert!(model_from_json("{}").is_err());
    assert!(model_from_json("not json").is_err());
    let model = SavedModel::Pca(pca_fit(&common::gaussian(10, 3, 33), 1).unwrap());
    let text = model_to_json(&model).unwrap().replace("\"version\": 1", "\"version\": 99");
    assert!(model_from_json(&text).is_err());
}
