//! Exact k-nearest-neighbor graph, quasi-curvature scores and curvature-driven
//! neighbor pruning.
//!
//! For a neighborhood `x_i1 … x_ik` with mean `x̄`, every neighbor direction
//! `(x_ij − x̄)/‖x_ij − x̄‖` is projected onto the normal space of the local
//! PCA fit (principal directions beyond the first `d`). The projection norm
//! divided by `k` is the neighbor score `c_ij`; their sum is the sample
//! curvature `c_i`. A perfectly flat neighborhood scores zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};
use crate::parallel;

/// Neighbors of one sample, ordered by ascending distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    /// Per-neighbor curvature score `c_ij`, zero until scored.
    pub scores: Vec<f64>,
    /// Neighbors whose direction from the neighborhood mean was undefined.
    pub degenerate: Vec<bool>,
    /// `c_i`, summed over the neighborhood before pruning.
    pub curvature: f64,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn retain_mask(&self, keep: &[bool]) -> Neighborhood {
        let pick = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect()
        };
        Neighborhood {
            indices: self
                .indices
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(x, _)| *x)
                .collect(),
            distances: pick(&self.distances),
            scores: pick(&self.scores),
            degenerate: self
                .degenerate
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(x, _)| *x)
                .collect(),
            curvature: self.curvature,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    k: usize,
    neighborhoods: Vec<Neighborhood>,
}

impl NeighborGraph {
    /// Neighbor count requested at construction (before pruning).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.neighborhoods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighborhoods.is_empty()
    }

    pub fn neighborhood(&self, i: usize) -> &Neighborhood {
        &self.neighborhoods[i]
    }

    pub fn neighborhoods(&self) -> &[Neighborhood] {
        &self.neighborhoods
    }

    /// `c_i` for every sample.
    pub fn curvatures(&self) -> Vec<f64> {
        self.neighborhoods.iter().map(|n| n.curvature).collect()
    }

    /// Retained neighbor count `k_i` for every sample.
    pub fn retained_counts(&self) -> Vec<usize> {
        self.neighborhoods.iter().map(Neighborhood::len).collect()
    }

    /// Every `c_ij` currently in the graph, sample-major.
    pub fn all_scores(&self) -> Vec<f64> {
        self.neighborhoods
            .iter()
            .flat_map(|n| n.scores.iter().copied())
            .collect()
    }
}

fn squared_distance(x: &Matrix, i: usize, j: usize) -> f64 {
    let mut acc = 0.0;
    for c in 0..x.ncols() {
        let diff = x[(i, c)] - x[(j, c)];
        acc += diff * diff;
    }
    acc
}

/// Orders by distance, then by index.
pub(crate) fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Exact Euclidean k-nearest neighbors of every row of `x`, self excluded.
pub fn knn(x: &Matrix, k: usize) -> Result<NeighborGraph> {
    let p = x.nrows();
    if k == 0 || k >= p {
        return Err(Error::InvalidArgument(format!(
            "neighbor count k={k} must be in 1..{p}"
        )));
    }
    numerics::ensure_finite(x, "features")?;
    let neighborhoods = parallel::map_indices(p, |i| {
        let mut cand: Vec<(f64, usize)> = (0..p)
            .filter(|&j| j != i)
            .map(|j| (squared_distance(x, i, j), j))
            .collect();
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, by_distance_then_index);
            cand.truncate(k);
        }
        cand.sort_by(by_distance_then_index);
        Neighborhood {
            indices: cand.iter().map(|c| c.1).collect(),
            distances: cand.iter().map(|c| c.0.sqrt()).collect(),
            scores: vec![0.0; k],
            degenerate: vec![false; k],
            curvature: 0.0,
        }
    });
    Ok(NeighborGraph { k, neighborhoods })
}

/// Scores every neighbor by how far its direction leaves the local tangent space.
pub fn quasi_curvature(graph: NeighborGraph, x: &Matrix, d: usize) -> Result<NeighborGraph> {
    let k = graph.k;
    if k < d + 1 {
        return Err(Error::InvalidArgument(format!(
            "quasi-curvature needs k >= d+1 (k={k}, d={d})"
        )));
    }
    if graph.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "graph vs features",
            expected: x.nrows(),
            found: graph.len(),
        });
    }
    let dim = x.ncols();
    let scored = parallel::try_map_indices(graph.len(), |i| {
        let hood = &graph.neighborhoods[i];
        let kk = hood.len();
        let mut centered = Matrix::zeros(kk, dim);
        for (r, &j) in hood.indices.iter().enumerate() {
            centered.row_mut(r).copy_from(&x.row(j));
        }
        let (centered, _) = numerics::center_columns(&centered);
        let bases = numerics::pca_bases(&centered, d)?;

        let scale = centered.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
        let mut scores = Vec::with_capacity(kk);
        let mut degenerate = Vec::with_capacity(kk);
        for row in centered.row_iter() {
            let norm = row.norm();
            if norm <= f64::EPSILON * scale || norm == 0.0 {
                scores.push(0.0);
                degenerate.push(true);
                continue;
            }
            let residual = if bases.normal.ncols() == 0 {
                0.0
            } else {
                (row * &bases.normal).norm() / norm
            };
            // projection of a unit vector onto an orthonormal frame is <= 1
            scores.push(residual.min(1.0) / kk as f64);
            degenerate.push(false);
        }
        let curvature = scores.iter().sum();
        Ok::<_, Error>(Neighborhood {
            indices: hood.indices.clone(),
            distances: hood.distances.clone(),
            scores,
            degenerate,
            curvature,
        })
    })?;
    Ok(NeighborGraph {
        k,
        neighborhoods: scored,
    })
}

/// How the pruning threshold η is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Threshold {
    /// Prune neighbors with `c_ij > η`.
    Absolute(f64),
    /// η is this quantile (in `[0, 1]`) of all neighbor scores.
    Quantile(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Quantile(0.9)
    }
}

impl Threshold {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Threshold::Absolute(v) if v.is_nan() => {
                Err(Error::InvalidArgument("eta must not be NaN".into()))
            }
            Threshold::Quantile(q) if !(0.0..=1.0).contains(&q) => Err(Error::InvalidArgument(
                format!("eta quantile {q} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }

    /// Absolute η for a scored graph.
    pub fn resolve(&self, graph: &NeighborGraph) -> Result<f64> {
        self.validate()?;
        match *self {
            Threshold::Absolute(v) => Ok(v),
            Threshold::Quantile(q) => {
                let mut scores = graph.all_scores();
                if scores.is_empty() {
                    return Ok(f64::INFINITY);
                }
                scores.sort_by(f64::total_cmp);
                Ok(quantile_sorted(&scores, q))
            }
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Drops neighbors scoring above `eta`, always keeping the `min_k` nearest.
pub fn prune(graph: &NeighborGraph, eta: f64, min_k: usize) -> NeighborGraph {
    let floor = min_k.max(1);
    let neighborhoods = parallel::map_indices(graph.len(), |i| {
        let hood = &graph.neighborhoods[i];
        let keep: Vec<bool> = hood
            .scores
            .iter()
            .enumerate()
            .map(|(r, &c)| r < floor || c <= eta || c.is_nan())
            .collect();
        hood.retain_mask(&keep)
    });
    NeighborGraph {
        k: graph.k,
        neighborhoods,
    }
}
