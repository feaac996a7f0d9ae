//! Self-describing JSON model documents.
//!
//! Float arrays are stored as base64 of little-endian f64 bytes (row-major) so
//! a save/load cycle reproduces every bit. Scalars that may be infinite are
//! written as strings.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Threshold;
use crate::numerics::Matrix;
use crate::oos::{Activation, ElmModel, InputScaler, NmQlleModel, PcaModel};
use crate::qlle::QlleConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum SavedModel {
    NmQlle(NmQlleModel),
    Pca(PcaModel),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::NmQlle(_) => "nm_qlle",
            SavedModel::Pca(_) => "pca",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SavedModel::NmQlle(m) => m.elm.input_dim(),
            SavedModel::Pca(m) => m.mean.len(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            SavedModel::NmQlle(m) => m.dim(),
            SavedModel::Pca(m) => m.dim(),
        }
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            SavedModel::NmQlle(m) => m.transform(x),
            SavedModel::Pca(m) => crate::oos::pca_transform(m, x),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ArrayDoc {
    rows: usize,
    cols: usize,
    f64le: String,
}

fn encode_f64s(values: impl Iterator<Item = f64>) -> String {
    let bytes: Vec<u8> = values.flat_map(f64::to_le_bytes).collect();
    STANDARD.encode(bytes)
}

fn decode_f64s(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::Format(format!("{what}: {e}")))?;
    if bytes.len() != 8 * expected {
        return Err(Error::Format(format!(
            "{what}: expected {expected} values, found {} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

impl ArrayDoc {
    fn from_matrix(m: &Matrix) -> Self {
        let (rows, cols) = m.shape();
        let values = (0..rows).flat_map(|r| (0..cols).map(move |c| m[(r, c)]));
        ArrayDoc {
            rows,
            cols,
            f64le: encode_f64s(values),
        }
    }

    fn from_vec(v: &[f64]) -> Self {
        ArrayDoc {
            rows: v.len(),
            cols: 1,
            f64le: encode_f64s(v.iter().copied()),
        }
    }

    fn to_matrix(&self, what: &str) -> Result<Matrix> {
        let n = self
            .rows
            .checked_mul(self.cols)
            .ok_or_else(|| Error::Format(format!("{what}: shape overflows")))?;
        let data = decode_f64s(&self.f64le, n, what)?;
        Ok(Matrix::from_row_slice(self.rows, self.cols, &data))
    }

    fn to_vec(&self, what: &str) -> Result<Vec<f64>> {
        if self.cols != 1 {
            return Err(Error::Format(format!("{what}: expected a column vector")));
        }
        decode_f64s(&self.f64le, self.rows, what)
    }
}

#[derive(Serialize, Deserialize)]
struct QlleConfigDoc {
    k: usize,
    eta_mode: String,
    eta_value: String,
    d: usize,
    min_k: usize,
    reg: String,
    invert_curvature: bool,
}

fn float_str(v: f64) -> String {
    format!("{v:?}")
}

fn parse_float(s: &str, what: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Format(format!("{what}: bad number '{s}'")))
}

impl QlleConfigDoc {
    fn new(cfg: &QlleConfig) -> Self {
        let (mode, value) = match cfg.eta {
            Threshold::Absolute(v) => ("absolute", v),
            Threshold::Quantile(q) => ("quantile", q),
        };
        QlleConfigDoc {
            k: cfg.k,
            eta_mode: mode.into(),
            eta_value: float_str(value),
            d: cfg.d,
            min_k: cfg.min_k,
            reg: float_str(cfg.reg),
            invert_curvature: cfg.invert_curvature,
        }
    }

    fn into_config(self) -> Result<QlleConfig> {
        let value = parse_float(&self.eta_value, "eta")?;
        let eta = match self.eta_mode.as_str() {
            "absolute" => Threshold::Absolute(value),
            "quantile" => Threshold::Quantile(value),
            other => return Err(Error::Format(format!("unknown eta mode '{other}'"))),
        };
        Ok(QlleConfig {
            k: self.k,
            eta,
            d: self.d,
            min_k: self.min_k,
            reg: parse_float(&self.reg, "reg")?,
            invert_curvature: self.invert_curvature,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ElmDoc {
    hidden: usize,
    input_dim: usize,
    output_dim: usize,
    activation: String,
    seed: u64,
    ridge: String,
    scaler_shift: ArrayDoc,
    scaler_scale: ArrayDoc,
    input_weights: ArrayDoc,
    biases: ArrayDoc,
    output_weights: ArrayDoc,
}

impl ElmDoc {
    fn new(m: &ElmModel) -> Self {
        ElmDoc {
            hidden: m.hidden_count(),
            input_dim: m.input_dim(),
            output_dim: m.output_dim(),
            activation: m.activation.name().into(),
            seed: m.seed,
            ridge: float_str(m.ridge),
            scaler_shift: ArrayDoc::from_vec(&m.scaler.shift),
            scaler_scale: ArrayDoc::from_vec(&m.scaler.scale),
            input_weights: ArrayDoc::from_matrix(&m.input_weights),
            biases: ArrayDoc::from_vec(&m.biases),
            output_weights: ArrayDoc::from_matrix(&m.output_weights),
        }
    }

    fn into_model(self) -> Result<ElmModel> {
        let activation = Activation::from_name(&self.activation)
            .ok_or_else(|| Error::Format(format!("unknown activation '{}'", self.activation)))?;
        let model = ElmModel {
            input_weights: self.input_weights.to_matrix("input_weights")?,
            biases: self.biases.to_vec("biases")?,
            output_weights: self.output_weights.to_matrix("output_weights")?,
            activation,
            scaler: InputScaler {
                shift: self.scaler_shift.to_vec("scaler_shift")?,
                scale: self.scaler_scale.to_vec("scaler_scale")?,
            },
            ridge: parse_float(&self.ridge, "ridge")?,
            seed: self.seed,
        };
        let shapes_ok = model.input_weights.shape() == (self.hidden, self.input_dim)
            && model.biases.len() == self.hidden
            && model.output_weights.shape() == (self.hidden, self.output_dim)
            && model.scaler.dim() == self.input_dim
            && model.scaler.scale.len() == self.input_dim;
        if !shapes_ok {
            return Err(Error::Format("elm arrays disagree with declared shapes".into()));
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
enum ModelDoc {
    NmQlle {
        version: u32,
        qlle_config: QlleConfigDoc,
        landmark_indices: Vec<usize>,
        landmark_features: ArrayDoc,
        landmark_embedding: ArrayDoc,
        elm: ElmDoc,
    },
    Pca {
        version: u32,
        mean: ArrayDoc,
        basis: ArrayDoc,
    },
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported model version {v}")));
    }
    Ok(())
}

pub fn model_to_json(model: &SavedModel) -> Result<String> {
    let doc = match model {
        SavedModel::NmQlle(m) => ModelDoc::NmQlle {
            version: FORMAT_VERSION,
            qlle_config: QlleConfigDoc::new(&m.qlle_config),
            landmark_indices: m.landmark_indices.clone(),
            landmark_features: ArrayDoc::from_matrix(&m.landmark_features),
            landmark_embedding: ArrayDoc::from_matrix(&m.landmark_embedding),
            elm: ElmDoc::new(&m.elm),
        },
        SavedModel::Pca(m) => ModelDoc::Pca {
            version: FORMAT_VERSION,
            mean: ArrayDoc::from_vec(&m.mean),
            basis: ArrayDoc::from_matrix(&m.basis),
        },
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(text: &str) -> Result<SavedModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    match doc {
        ModelDoc::NmQlle {
            version,
            qlle_config,
            landmark_indices,
            landmark_features,
            landmark_embedding,
            elm,
        } => {
            check_version(version)?;
            let m = NmQlleModel {
                landmark_indices,
                landmark_features: landmark_features.to_matrix("landmark_features")?,
                landmark_embedding: landmark_embedding.to_matrix("landmark_embedding")?,
                elm: elm.into_model()?,
                qlle_config: qlle_config.into_config()?,
            };
            if m.landmark_features.nrows() != m.landmark_indices.len()
                || m.landmark_embedding.nrows() != m.landmark_indices.len()
            {
                return Err(Error::Format("landmark arrays disagree in length".into()));
            }
            Ok(SavedModel::NmQlle(m))
        }
        ModelDoc::Pca { version, mean, basis } => {
            check_version(version)?;
            let m = PcaModel {
                mean: mean.to_vec("mean")?,
                basis: basis.to_matrix("basis")?,
            };
            if m.basis.nrows() != m.mean.len() {
                return Err(Error::Format("pca basis and mean disagree".into()));
            }
            Ok(SavedModel::Pca(m))
        }
    }
}

pub fn save_model(model: &SavedModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    model_from_json(&fs::read_to_string(path)?)
}
