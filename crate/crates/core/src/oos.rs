//! Out-of-sample extension: landmark selection, an extreme learning machine
//! trained on (landmark, embedding) pairs, the composed landmark pipeline, and
//! a PCA baseline.

use nalgebra::DVector;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, Stage};
use crate::numerics::{self, Matrix, DEFAULT_RANK_TOL};
use crate::parallel;
use crate::qlle::{fit_qlle, QlleConfig};

/// Seeded generator used for every random draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `P` distinct indices drawn uniformly from `0..n`, returned in ascending order.
pub fn select_landmarks_random(n: usize, p: usize, seed: u64) -> Result<Vec<usize>> {
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!(
            "landmark count {p} must be in 1..={n}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut picked = index::sample(&mut rng, n, p).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

fn sq_dist_rows(a: &Matrix, i: usize, b: &Matrix, j: usize) -> f64 {
    let mut acc = 0.0;
    for c in 0..a.ncols() {
        let t = a[(i, c)] - b[(j, c)];
        acc += t * t;
    }
    acc
}

fn nearest_center(x: &Matrix, i: usize, centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.nrows() {
        let d = sq_dist_rows(x, i, centers, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: each further center is drawn with probability
/// proportional to the squared distance to the closest chosen one.
fn kmeans_plus_plus(x: &Matrix, p: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist_rows(x, i, x, chosen[0])).collect();
    while chosen.len() < p {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total has a positive weight")
        } else {
            // every sample coincides with a center: take the first unused one
            (0..n).find(|i| !chosen.contains(i)).expect("p <= n")
        };
        chosen.push(next);
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist_rows(x, i, x, next));
        }
    }
    chosen
}

/// Lloyd k-means from k-means++ seeds; each final center is replaced by
/// the nearest real sample not already taken. Returns ascending indices.
pub fn select_landmarks_kmeans(x: &Matrix, p: usize, iters: usize, seed: u64) -> Result<Vec<usize>> {
    let n = x.nrows();
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!(
            "landmark count {p} must be in 1..={n}"
        )));
    }
    numerics::ensure_finite(x, "features")?;
    let dim = x.ncols();
    let mut rng = seeded_rng(seed);
    let init = kmeans_plus_plus(x, p, &mut rng);
    let mut centers = Matrix::from_fn(p, dim, |r, c| x[(init[r], c)]);
    let mut assign = vec![usize::MAX; n];

    for _ in 0..iters {
        let nearest = parallel::map_indices(n, |i| nearest_center(x, i, &centers));
        let changed = nearest
            .iter()
            .zip(&assign)
            .any(|(&(c, _), &prev)| c != prev);
        for (a, (c, _)) in assign.iter_mut().zip(&nearest) {
            *a = *c;
        }
        let mut sums = Matrix::zeros(p, dim);
        let mut counts = vec![0usize; p];
        for i in 0..n {
            counts[assign[i]] += 1;
            let mut row = sums.row_mut(assign[i]);
            row += x.row(i);
        }
        let mut taken = vec![false; n];
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mut row = centers.row_mut(c);
                row.copy_from(&(sums.row(c) / count as f64));
            } else {
                // empty cluster: restart it on the sample farthest from its center
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| {
                        nearest[a].1.total_cmp(&nearest[b].1).then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                taken[far] = true;
                centers.row_mut(c).copy_from(&x.row(far));
            }
        }
        if !changed {
            break;
        }
    }

    let mut used = vec![false; n];
    let mut chosen = Vec::with_capacity(p);
    for c in 0..p {
        let mut order: Vec<(f64, usize)> = (0..n).map(|i| (sq_dist_rows(x, i, &centers, c), i)).collect();
        order.sort_by(crate::graph::by_distance_then_index);
        let pick = order
            .iter()
            .find(|(_, i)| !used[*i])
            .map(|&(_, i)| i)
            .expect("p <= n leaves a free sample");
        used[pick] = true;
        chosen.push(pick);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Within-cluster sum of squares when every sample joins its nearest landmark.
pub fn landmark_wcss(x: &Matrix, landmarks: &[usize]) -> f64 {
    let centers = Matrix::from_fn(landmarks.len(), x.ncols(), |r, c| x[(landmarks[r], c)]);
    (0..x.nrows()).map(|i| nearest_center(x, i, &centers).1).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Per-dimension affine map `(x − shift)·scale` sending the fitted range onto [−1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct InputScaler {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaler {
    pub fn fit(x: &Matrix) -> Self {
        let mut shift = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let lo = col.min();
            let hi = col.max();
            shift.push(0.5 * (lo + hi));
            // constant columns map to 0
            scale.push(if hi > lo { 2.0 / (hi - lo) } else { 1.0 });
        }
        InputScaler { shift, scale }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, value: f64, dim: usize) -> f64 {
        (value - self.shift[dim]) * self.scale[dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElmConfig {
    pub hidden: usize,
    pub seed: u64,
    /// Ridge λ; zero solves with the pseudo-inverse.
    pub ridge: f64,
    /// Relative singular-value cut-off for the pseudo-inverse.
    pub rank_tol: f64,
}

impl ElmConfig {
    pub fn new(hidden: usize, seed: u64) -> Self {
        ElmConfig {
            hidden,
            seed,
            ridge: 0.0,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }
}

/// Single-hidden-layer network with frozen random input weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel {
    /// Ñ×D
    pub input_weights: Matrix,
    /// Ñ
    pub biases: Vec<f64>,
    /// Ñ×d
    pub output_weights: Matrix,
    pub activation: Activation,
    pub scaler: InputScaler,
    pub ridge: f64,
    pub seed: u64,
}

impl ElmModel {
    pub fn hidden_count(&self) -> usize {
        self.biases.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.output_weights.ncols()
    }

    /// Hidden-layer activations for one sample.
    fn hidden_row(&self, x: &Matrix, r: usize, out: &mut [f64]) {
        let dim = self.input_dim();
        let mut scaled = Vec::with_capacity(dim);
        for c in 0..dim {
            scaled.push(self.scaler.apply(x[(r, c)], c));
        }
        for (j, h) in out.iter_mut().enumerate() {
            let mut z = self.biases[j];
            for (c, s) in scaled.iter().enumerate() {
                z += self.input_weights[(j, c)] * s;
            }
            *h = self.activation.apply(z);
        }
    }

    /// Hidden-layer output matrix `H` (N×Ñ) for the rows of `x`.
    pub fn hidden_matrix(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let hidden = self.hidden_count();
        let rows = parallel::map_indices(x.nrows(), |r| {
            let mut h = vec![0.0; hidden];
            self.hidden_row(x, r, &mut h);
            h
        });
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Matrix::from_row_slice(x.nrows(), hidden, &flat))
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "elm input dimension",
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        numerics::ensure_finite(x, "elm input")
    }
}

/// Trains output weights on landmark features `xhat` (P×D) and targets `yhat` (P×d).
pub fn elm_train(xhat: &Matrix, yhat: &Matrix, cfg: &ElmConfig) -> Result<ElmModel> {
    let (p, dim) = xhat.shape();
    if p == 0 || cfg.hidden == 0 {
        return Err(Error::InvalidArgument(
            "elm needs at least one sample and one hidden node".into(),
        ));
    }
    if yhat.nrows() != p {
        return Err(Error::DimensionMismatch {
            what: "elm targets",
            expected: p,
            found: yhat.nrows(),
        });
    }
    numerics::ensure_finite(xhat, "elm training features")?;
    numerics::ensure_finite(yhat, "elm training targets")?;

    let mut rng = seeded_rng(cfg.seed);
    // filled row-major so the draw order does not depend on storage layout
    let mut input_weights = Matrix::zeros(cfg.hidden, dim);
    for j in 0..cfg.hidden {
        for c in 0..dim {
            input_weights[(j, c)] = rng.random_range(-1.0..=1.0);
        }
    }
    let biases: Vec<f64> = (0..cfg.hidden).map(|_| rng.random_range(-1.0..=1.0)).collect();

    let mut model = ElmModel {
        input_weights,
        biases,
        output_weights: Matrix::zeros(cfg.hidden, yhat.ncols()),
        activation: Activation::Sigmoid,
        scaler: InputScaler::fit(xhat),
        ridge: cfg.ridge,
        seed: cfg.seed,
    };
    let h = model.hidden_matrix(xhat)?;
    numerics::ensure_finite(&h, "hidden layer output")?;
    model.output_weights = numerics::ridge_solve(&h, yhat, cfg.ridge, cfg.rank_tol)?;
    Ok(model)
}

/// Applies the explicit map `f(x) = Σ_i β_i g(a_i·scale(x) + b_i)` row by row.
pub fn elm_map(model: &ElmModel, x: &Matrix) -> Result<Matrix> {
    model.check_input(x)?;
    let hidden = model.hidden_count();
    let out_dim = model.output_dim();
    let rows = parallel::map_indices(x.nrows(), |r| {
        let mut h = vec![0.0; hidden];
        model.hidden_row(x, r, &mut h);
        let mut y = vec![0.0; out_dim];
        for (j, hj) in h.iter().enumerate() {
            for (c, yc) in y.iter_mut().enumerate() {
                *yc += hj * model.output_weights[(j, c)];
            }
        }
        y
    });
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Matrix::from_row_slice(x.nrows(), out_dim, &flat))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandmarkSelection {
    Random,
    /// Lloyd iterations before snapping centers to samples.
    KMeans { iters: usize },
}

impl LandmarkSelection {
    pub fn name(&self) -> &'static str {
        match self {
            LandmarkSelection::Random => "random",
            LandmarkSelection::KMeans { .. } => "kmeans",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmConfig {
    pub landmarks: usize,
    pub elm: ElmConfig,
    pub selection: LandmarkSelection,
}

impl NmConfig {
    pub fn new(landmarks: usize, hidden: usize, seed: u64) -> Self {
        NmConfig {
            landmarks,
            elm: ElmConfig::new(hidden, seed),
            selection: LandmarkSelection::Random,
        }
    }
}

/// Landmark embedding plus the network that extends it to arbitrary samples.
#[derive(Debug, Clone, PartialEq)]
pub struct NmQlleModel {
    pub landmark_indices: Vec<usize>,
    pub landmark_features: Matrix,
    pub landmark_embedding: Matrix,
    pub elm: ElmModel,
    pub qlle_config: QlleConfig,
}

impl NmQlleModel {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        elm_map(&self.elm, x)
    }

    pub fn dim(&self) -> usize {
        self.landmark_embedding.ncols()
    }
}

/// Picks landmarks, embeds them with QLLE and trains the explicit map.
pub fn fit_nm_qlle(x: &Matrix, qlle: &QlleConfig, nm: &NmConfig) -> Result<NmQlleModel> {
    qlle.validate()?;
    let n = x.nrows();
    if nm.landmarks > n {
        return Err(Error::InvalidArgument(format!(
            "landmark count {} exceeds sample count {n}",
            nm.landmarks
        )));
    }
    if nm.landmarks <= qlle.k {
        return Err(Error::InvalidArgument(format!(
            "landmark count {} must exceed k={}",
            nm.landmarks, qlle.k
        )));
    }
    let seed = nm.elm.seed;
    let landmark_indices = match nm.selection {
        LandmarkSelection::Random => select_landmarks_random(n, nm.landmarks, seed),
        LandmarkSelection::KMeans { iters } => select_landmarks_kmeans(x, nm.landmarks, iters, seed),
    }
    .map_err(Error::at(Stage::Landmarks))?;
    let landmark_features = x.select_rows(&landmark_indices);
    let fit = fit_qlle(&landmark_features, qlle)?;
    let landmark_embedding = fit.embedding.coords;
    let elm = elm_train(&landmark_features, &landmark_embedding, &nm.elm)
        .map_err(Error::at(Stage::ElmTrain))?;
    Ok(NmQlleModel {
        landmark_indices,
        landmark_features,
        landmark_embedding,
        elm,
        qlle_config: qlle.clone(),
    })
}

/// Mean-centered linear projection onto the top principal directions.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// D×d, orthonormal columns.
    pub basis: Matrix,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

pub fn pca_fit(x: &Matrix, d: usize) -> Result<PcaModel> {
    let (n, dim) = x.shape();
    if d == 0 || d > n.min(dim) {
        return Err(Error::Stage {
            stage: Stage::Pca,
            source: Box::new(Error::InvalidArgument(format!(
                "pca dimension {d} must be in 1..={}",
                n.min(dim)
            ))),
        });
    }
    numerics::ensure_finite(x, "pca input")?;
    let (centered, mean) = numerics::center_columns(x);
    let bases = numerics::pca_bases_with_tol(&centered, d, 0.0).map_err(Error::at(Stage::Pca))?;
    Ok(PcaModel {
        mean: mean.iter().copied().collect(),
        basis: bases.tangent,
    })
}

pub fn pca_transform(model: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.ncols() != model.mean.len() {
        return Err(Error::DimensionMismatch {
            what: "pca input dimension",
            expected: model.mean.len(),
            found: x.ncols(),
        });
    }
    let mean = DVector::from_column_slice(&model.mean);
    let d = model.dim();
    let rows = parallel::map_indices(x.nrows(), |r| {
        let centered = x.row(r).transpose() - &mean;
        let proj = model.basis.tr_mul(&centered);
        (0..d).map(|c| proj[c]).collect::<Vec<f64>>()
    });
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Matrix::from_row_slice(x.nrows(), d, &flat))
}
