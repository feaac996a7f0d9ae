//! Reconstruction weights, curvature-weighted spectral embedding and the
//! end-to-end quasi-curvature LLE fit.

use nalgebra::DVector;

use crate::error::{Error, Result, Stage};
use crate::graph::{self, NeighborGraph, Threshold};
use crate::numerics::{self, Matrix};
use crate::parallel;

/// Default Tikhonov coefficient, relative to the trace of each local Gram matrix.
pub const DEFAULT_REG: f64 = 1e-3;

/// Reciprocal condition below which a local weight system counts as singular.
const SINGULAR_RCOND: f64 = 1e-13;

/// Lowest eigenvalue of the alignment matrix still treated as nonnegative,
/// relative to `max(1, ‖M‖)`.
const NEGATIVE_EIG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QlleConfig {
    /// Initial neighbor count.
    pub k: usize,
    pub eta: Threshold,
    /// Embedding dimension.
    pub d: usize,
    /// Number of nearest neighbors that pruning never removes.
    pub min_k: usize,
    /// Weight regularization, scaled by the local Gram trace. Zero disables it.
    pub reg: f64,
    /// Weight the embedding objective by `1/c_i` instead of `c_i`.
    pub invert_curvature: bool,
}

impl QlleConfig {
    pub fn new(k: usize, d: usize) -> Self {
        QlleConfig {
            k,
            eta: Threshold::default(),
            d,
            min_k: d + 1,
            reg: DEFAULT_REG,
            invert_curvature: false,
        }
    }

    pub fn with_eta(mut self, eta: Threshold) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_reg(mut self, reg: f64) -> Self {
        self.reg = reg;
        self
    }

    pub fn with_min_k(mut self, min_k: usize) -> Self {
        self.min_k = min_k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidArgument("embedding dimension d must be >= 1".into()));
        }
        if self.k < self.d + 1 {
            return Err(Error::InvalidArgument(format!(
                "k={} must be at least d+1={}",
                self.k,
                self.d + 1
            )));
        }
        if self.min_k == 0 || self.min_k > self.k {
            return Err(Error::InvalidArgument(format!(
                "min_k={} must be in 1..={}",
                self.min_k, self.k
            )));
        }
        if !self.reg.is_finite() || self.reg < 0.0 {
            return Err(Error::InvalidArgument(format!("reg must be >= 0, got {}", self.reg)));
        }
        self.eta.validate()
    }
}

/// Sparse reconstruction weights; row `i` lives on the retained neighbors of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: Vec<WeightRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl WeightMatrix {
    pub fn from_rows(rows: Vec<WeightRow>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.indices.len() != row.weights.len() {
                return Err(Error::DimensionMismatch {
                    what: "weight row",
                    expected: row.indices.len(),
                    found: row.weights.len(),
                });
            }
            if row.indices.iter().any(|&j| j >= n || j == i) {
                return Err(Error::InvalidArgument(format!("weight row {i} has an invalid column")));
            }
        }
        Ok(WeightMatrix { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &WeightRow {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[WeightRow] {
        &self.rows
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.rows.len();
        let mut w = Matrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for (&j, &v) in row.indices.iter().zip(&row.weights) {
                w[(i, j)] += v;
            }
        }
        w
    }
}

/// Solves one constrained local problem: minimize ‖x_i − Σ w_j x_j‖² with Σ w_j = 1.
fn local_weights(x: &Matrix, i: usize, neighbors: &[usize], reg: f64) -> Result<Vec<f64>> {
    let kk = neighbors.len();
    if kk == 0 {
        return Err(Error::SingularGram { sample: i });
    }
    let dim = x.ncols();
    let mut z = Matrix::zeros(kk, dim);
    for (r, &j) in neighbors.iter().enumerate() {
        for c in 0..dim {
            z[(r, c)] = x[(j, c)] - x[(i, c)];
        }
    }
    let mut gram = &z * z.transpose();
    if reg > 0.0 {
        let shift = reg * gram.trace();
        for r in 0..kk {
            gram[(r, r)] += shift;
        }
    }
    // KKT system [G 1; 1ᵀ 0][w; μ] = [0; 1]; same minimizer as normalizing G⁻¹1,
    // but also defined when G itself is singular and the constraint pins w.
    let mut kkt = Matrix::zeros(kk + 1, kk + 1);
    kkt.view_mut((0, 0), (kk, kk)).copy_from(&gram);
    for r in 0..kk {
        kkt[(r, kk)] = 1.0;
        kkt[(kk, r)] = 1.0;
    }
    let svd = numerics::sorted_svd(&kkt, true)?;
    let smax = svd.sigma[0];
    let smin = svd.sigma[kk];
    if smax.is_nan() || smax <= 0.0 || smin <= SINGULAR_RCOND * smax {
        return Err(Error::SingularGram { sample: i });
    }
    // x = V Σ⁻¹ Uᵀ e_k
    let u = svd.u.expect("requested");
    let coef = DVector::from_fn(kk + 1, |j, _| u[(kk, j)] / svd.sigma[j]);
    let sol = &svd.v * coef;
    let mut w: Vec<f64> = sol.iter().take(kk).copied().collect();
    let total: f64 = w.iter().sum();
    if !total.is_finite() || total.abs() < f64::EPSILON {
        return Err(Error::SingularGram { sample: i });
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Per-sample affine reconstruction weights over the retained neighbors.
pub fn reconstruction_weights(x: &Matrix, graph: &NeighborGraph, reg: f64) -> Result<WeightMatrix> {
    if graph.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "graph vs features",
            expected: x.nrows(),
            found: graph.len(),
        });
    }
    if reg.is_nan() || reg < 0.0 {
        return Err(Error::InvalidArgument(format!("reg must be >= 0, got {reg}")));
    }
    let rows = parallel::try_map_indices(graph.len(), |i| {
        let hood = graph.neighborhood(i);
        let weights = local_weights(x, i, &hood.indices, reg)?;
        Ok::<_, Error>(WeightRow {
            indices: hood.indices.clone(),
            weights,
        })
    })?;
    Ok(WeightMatrix { rows })
}

/// Embedding coordinates with the data that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// P×d, zero column means, `YᵀY/P = I`.
    pub coords: Matrix,
    /// The `d` eigenvalues of the alignment matrix kept for `coords`.
    pub eigenvalues: Vec<f64>,
    /// Stabilized per-sample weights `c'_i` used in the objective.
    pub curvature_weights: Vec<f64>,
}

/// Stabilized objective weights: `c_i + 1e-6·max c`, uniform when all `c_i`
/// vanish, optionally inverted.
pub fn stabilized_weights(c: &[f64], invert: bool) -> Vec<f64> {
    let max = c.iter().copied().fold(0.0, f64::max);
    let mut out: Vec<f64> = if max < 1e-12 {
        vec![1.0; c.len()]
    } else {
        let eps = 1e-6 * max;
        c.iter().map(|&v| v.max(0.0) + eps).collect()
    };
    if invert {
        out.iter_mut().for_each(|v| *v = 1.0 / *v);
    }
    out
}

/// Builds `M = (I − W)ᵀ diag(c') (I − W)`.
pub fn alignment_matrix(w: &WeightMatrix, c_prime: &[f64]) -> Matrix {
    let n = w.len();
    let mut m = Matrix::zeros(n, n);
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for (i, row) in w.rows.iter().enumerate() {
        // row i of (I − W)
        entries.clear();
        entries.push((i, 1.0));
        entries.extend(row.indices.iter().zip(&row.weights).map(|(&j, &v)| (j, -v)));
        let ci = c_prime[i];
        for &(a, va) in &entries {
            for &(b, vb) in &entries {
                m[(a, b)] += ci * va * vb;
            }
        }
    }
    m
}

/// Objective `Σ c'_i ‖y_i − Σ_j w_ij y_j‖²` for given coordinates.
pub fn embedding_objective(w: &WeightMatrix, c_prime: &[f64], y: &Matrix) -> f64 {
    let mut total = 0.0;
    for (i, row) in w.rows.iter().enumerate() {
        let mut residual = y.row(i).into_owned();
        for (&j, &v) in row.indices.iter().zip(&row.weights) {
            residual -= y.row(j) * v;
        }
        total += c_prime[i] * residual.norm_squared();
    }
    total
}

/// Curvature-weighted spectral embedding from reconstruction weights.
///
/// Returns the bottom `d` eigenvectors of `M` orthogonal to the constant vector,
/// scaled so `YᵀY/P = I`.
pub fn embedding(w: &WeightMatrix, c: &[f64], d: usize, invert_curvature: bool) -> Result<Embedding> {
    let n = w.len();
    if c.len() != n {
        return Err(Error::DimensionMismatch {
            what: "curvature vector",
            expected: n,
            found: c.len(),
        });
    }
    if d == 0 || d + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension {d} needs at least {} samples, have {n}",
            d + 1
        )));
    }
    if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument("curvatures must be finite and >= 0".into()));
    }
    let c_prime = stabilized_weights(c, invert_curvature);
    let mut m = alignment_matrix(w, &c_prime);

    // Each row of I − W sums to zero, so the constant vector is an exact null
    // vector of M. Lifting it above the spectrum leaves the remaining
    // eigenpairs untouched and keeps it out of the bottom d.
    let lift = m
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1.0);
    m.add_scalar_mut(2.0 * lift / n as f64);

    let pairs = numerics::smallest_eigvecs(&m, d).map_err(Error::at(Stage::Embedding))?;
    if let Some(&lowest) = pairs.values.first() {
        if lowest < -NEGATIVE_EIG_TOL * lift {
            return Err(Error::Eigen(format!(
                "alignment matrix is not positive semidefinite (eigenvalue {lowest:e})"
            )));
        }
    }
    let mut coords = pairs.vectors;
    // project out any roundoff along the constant vector, then fix the scale
    let scale = (n as f64).sqrt();
    for mut col in coords.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if norm > 0.0 {
            col *= scale / norm;
        }
    }
    Ok(Embedding {
        coords,
        eigenvalues: pairs.values,
        curvature_weights: c_prime,
    })
}

/// Everything produced by one QLLE fit.
#[derive(Debug, Clone)]
pub struct QlleFit {
    pub embedding: Embedding,
    pub graph: NeighborGraph,
    pub weights: WeightMatrix,
    /// Absolute pruning threshold actually applied.
    pub eta: f64,
}

/// KNN, curvature scoring, pruning, weights and embedding in sequence.
pub fn fit_qlle(x: &Matrix, cfg: &QlleConfig) -> Result<QlleFit> {
    cfg.validate()?;
    if x.nrows() <= cfg.k {
        return Err(Error::InvalidArgument(format!(
            "need more samples ({}) than neighbors (k={})",
            x.nrows(),
            cfg.k
        )));
    }
    let graph = graph::knn(x, cfg.k).map_err(Error::at(Stage::Knn))?;
    let graph = graph::quasi_curvature(graph, x, cfg.d).map_err(Error::at(Stage::Curvature))?;
    let eta = cfg.eta.resolve(&graph).map_err(Error::at(Stage::Prune))?;
    let graph = graph::prune(&graph, eta, cfg.min_k);
    let weights = reconstruction_weights(x, &graph, cfg.reg).map_err(Error::at(Stage::Weights))?;
    let embedding = embedding(&weights, &graph.curvatures(), cfg.d, cfg.invert_curvature)
        .map_err(|e| match e {
            Error::Stage { .. } => e,
            other => Error::at(Stage::Embedding)(other),
        })?;
    Ok(QlleFit {
        embedding,
        graph,
        weights,
        eta,
    })
}
