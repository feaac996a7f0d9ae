//! Leave-one-out precision@returns and the per-dimension retrieval sweep.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use super::dataset::LabeledDataset;
use super::report::{DimRecord, RetrievalReport};
use crate::error::{Error, Result};
use crate::graph::{by_distance_then_index, Threshold};
use crate::numerics::Matrix;
use crate::oos::{self, NmConfig};
use crate::parallel;
use crate::qlle::{self, QlleConfig, DEFAULT_REG};

#[derive(Debug, Clone, PartialEq)]
pub struct Precision {
    pub mean: f64,
    pub per_query: Vec<f64>,
}

/// Every sample queries all others; precision is the share of the `returns`
/// nearest (Euclidean, ties by index) that carry the query's label.
pub fn precision_at_k(y: &Matrix, labels: &[usize], returns: usize) -> Result<Precision> {
    let n = y.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: n,
            found: labels.len(),
        });
    }
    if returns == 0 || returns + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "returns={returns} must be in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let dim = y.ncols();
    let per_query = parallel::map_indices(n, |q| {
        let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
        for j in (0..n).filter(|&j| j != q) {
            let mut acc = 0.0;
            for c in 0..dim {
                let t = y[(q, c)] - y[(j, c)];
                acc += t * t;
            }
            cand.push((acc, j));
        }
        if returns < cand.len() {
            cand.select_nth_unstable_by(returns - 1, by_distance_then_index);
        }
        let hits = cand[..returns]
            .iter()
            .filter(|&&(_, j)| labels[j] == labels[q])
            .count();
        hits as f64 / returns as f64
    });
    let mean = per_query.iter().sum::<f64>() / n as f64;
    Ok(Precision { mean, per_query })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    NmQlle,
    Qlle,
    Pca,
    Original,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NmQlle => "nm_qlle",
            Method::Qlle => "qlle",
            Method::Pca => "pca",
            Method::Original => "original",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "nm_qlle" => Ok(Method::NmQlle),
            "qlle" => Ok(Method::Qlle),
            "pca" => Ok(Method::Pca),
            "original" => Ok(Method::Original),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// QLLE settings that do not depend on the target dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct QlleParams {
    pub k: usize,
    pub eta: Threshold,
    /// `None` means `d + 1`.
    pub min_k: Option<usize>,
    pub reg: f64,
    pub invert_curvature: bool,
}

impl Default for QlleParams {
    fn default() -> Self {
        QlleParams {
            k: 10,
            eta: Threshold::default(),
            min_k: None,
            reg: DEFAULT_REG,
            invert_curvature: false,
        }
    }
}

impl QlleParams {
    pub fn for_dim(&self, d: usize) -> QlleConfig {
        QlleConfig {
            k: self.k,
            eta: self.eta,
            d,
            min_k: self.min_k.unwrap_or(d + 1),
            reg: self.reg,
            invert_curvature: self.invert_curvature,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub qlle: QlleParams,
    pub nm: NmConfig,
    pub returns: usize,
    /// When false, timing columns are written as zero so reports are reproducible.
    pub record_timing: bool,
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

struct Reduced {
    coords: Matrix,
    fit_ms: f64,
    map_ms: f64,
}

fn reduce(ds: &LabeledDataset, method: Method, d: usize, cfg: &SweepConfig) -> Result<Reduced> {
    let x = &ds.features;
    if d == 0 || d > ds.dim() {
        return Err(Error::InvalidArgument(format!(
            "target dimension {d} must be in 1..={}",
            ds.dim()
        )));
    }
    match method {
        Method::Original => Ok(Reduced {
            coords: x.clone(),
            fit_ms: 0.0,
            map_ms: 0.0,
        }),
        Method::Pca => {
            let t = Instant::now();
            let model = oos::pca_fit(x, d)?;
            let fit_ms = elapsed_ms(t);
            let t = Instant::now();
            let coords = oos::pca_transform(&model, x)?;
            Ok(Reduced { coords, fit_ms, map_ms: elapsed_ms(t) })
        }
        Method::Qlle => {
            // no explicit map: embedding the collection is the mapping step
            let t = Instant::now();
            let fit = qlle::fit_qlle(x, &cfg.qlle.for_dim(d))?;
            let ms = elapsed_ms(t);
            Ok(Reduced {
                coords: fit.embedding.coords,
                fit_ms: ms,
                map_ms: ms,
            })
        }
        Method::NmQlle => {
            let t = Instant::now();
            let model = oos::fit_nm_qlle(x, &cfg.qlle.for_dim(d), &cfg.nm)?;
            let fit_ms = elapsed_ms(t);
            let t = Instant::now();
            let coords = model.transform(x)?;
            Ok(Reduced { coords, fit_ms, map_ms: elapsed_ms(t) })
        }
    }
}

fn evaluate(ds: &LabeledDataset, method: Method, d: usize, cfg: &SweepConfig) -> Result<DimRecord> {
    let reduced = reduce(ds, method, d, cfg)?;
    let t = Instant::now();
    let precision = precision_at_k(&reduced.coords, &ds.labels, cfg.returns)?;
    let rank_ms = elapsed_ms(t);
    let n = ds.len() as f64;
    let (query_ms, fit_ms) = if cfg.record_timing {
        ((reduced.map_ms + rank_ms) / n, reduced.fit_ms)
    } else {
        (0.0, 0.0)
    };
    Ok(DimRecord {
        d,
        mean_precision: Some(precision.mean),
        mean_query_ms: query_ms,
        fit_ms,
        error: None,
    })
}

/// Fits and scores `method` once per target dimension. Failures are recorded
/// in their row and the sweep continues.
pub fn sweep(ds: &LabeledDataset, method: Method, d_list: &[usize], cfg: &SweepConfig) -> RetrievalReport {
    let dims: Vec<usize> = match method {
        Method::Original => vec![ds.dim()],
        _ => d_list.to_vec(),
    };
    let records = dims
        .into_iter()
        .map(|d| {
            evaluate(ds, method, d, cfg).unwrap_or_else(|e| DimRecord {
                d,
                mean_precision: None,
                mean_query_ms: 0.0,
                fit_ms: 0.0,
                error: Some(e.to_string()),
            })
        })
        .collect();
    RetrievalReport::new(method.name(), records)
}
