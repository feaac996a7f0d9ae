//! Synthetic manifolds with known intrinsic coordinates.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};
use crate::oos::seeded_rng;

/// Height of the swiss roll strip.
pub const SWISS_ROLL_HEIGHT: f64 = 21.0;
/// Class count used for generated labels.
pub const LABEL_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    SwissRoll,
    Plane,
    Sphere,
}

impl ManifoldKind {
    /// Dimension of the space the generator natively draws in.
    pub fn base_dim(self) -> usize {
        match self {
            ManifoldKind::Plane => 2,
            ManifoldKind::SwissRoll | ManifoldKind::Sphere => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::SwissRoll => "swiss_roll",
            ManifoldKind::Plane => "plane",
            ManifoldKind::Sphere => "sphere",
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "swiss_roll" => Ok(ManifoldKind::SwissRoll),
            "plane" => Ok(ManifoldKind::Plane),
            "sphere" => Ok(ManifoldKind::Sphere),
            other => Err(Error::InvalidArgument(format!("unknown manifold kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub kind: ManifoldKind,
    pub n: usize,
    /// Standard deviation of isotropic Gaussian noise in the ambient space.
    pub noise: f64,
    pub seed: u64,
    /// Ambient dimension; `None` keeps the generator's native space (plane: 3).
    pub ambient_dim: Option<usize>,
}

impl SynthConfig {
    pub fn new(kind: ManifoldKind, n: usize, seed: u64) -> Self {
        SynthConfig {
            kind,
            n,
            noise: 0.0,
            seed,
            ambient_dim: None,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_ambient_dim(mut self, dim: usize) -> Self {
        self.ambient_dim = Some(dim);
        self
    }
}

/// Generated samples plus the ground truth they came from.
#[derive(Debug, Clone)]
pub struct SynthManifold {
    pub dataset: LabeledDataset,
    /// Generator parameters per sample: swiss roll (t, height), plane (u, v)
    /// before whitening, sphere (polar, azimuth).
    pub params: Matrix,
    /// Low-dimensional reference coordinates: swiss roll (arc length, height),
    /// plane (whitened u, v), sphere (polar, azimuth).
    pub ground_truth: Matrix,
    /// Orthonormal rows mapping the native space into the ambient one, if used.
    pub frame: Option<Matrix>,
}

/// Arc length of the spiral `t ↦ (t cos t, t sin t)` from 0 to `t`.
pub fn swiss_roll_arc_length(t: f64) -> f64 {
    0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

fn bin(value: f64, lo: f64, hi: f64) -> i64 {
    let b = ((value - lo) / (hi - lo) * LABEL_BINS as f64).floor() as i64;
    b.clamp(0, LABEL_BINS as i64 - 1)
}

/// Random orthonormal `base × ambient` frame.
fn random_frame<R: Rng>(rng: &mut R, base: usize, ambient: usize) -> Matrix {
    let gauss = Matrix::from_fn(ambient, base, |_, _| StandardNormal.sample(rng));
    let q = gauss.qr().q();
    q.columns(0, base).transpose()
}

/// Centers the columns and rescales them so the empirical covariance is the identity.
fn whiten(m: &Matrix) -> Result<Matrix> {
    let (centered, _) = numerics::center_columns(m);
    let cov = centered.transpose() * &centered / m.nrows() as f64;
    let eig = cov.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument("cannot whiten degenerate plane sample".into()));
    }
    let inv_sqrt = &eig.eigenvectors
        * Matrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    Ok(centered * inv_sqrt)
}

pub fn synth_manifold(cfg: &SynthConfig) -> Result<SynthManifold> {
    if cfg.n < 10 {
        return Err(Error::InvalidArgument(format!(
            "synthetic manifolds need at least 10 samples, got {}",
            cfg.n
        )));
    }
    if !cfg.noise.is_finite() || cfg.noise < 0.0 {
        return Err(Error::InvalidArgument(format!("noise must be >= 0, got {}", cfg.noise)));
    }
    let base = cfg.kind.base_dim();
    let ambient = cfg.ambient_dim.unwrap_or(base.max(3));
    if ambient < base {
        return Err(Error::InvalidArgument(format!(
            "{} needs an ambient dimension of at least {base}",
            cfg.kind
        )));
    }
    let n = cfg.n;
    let mut rng = seeded_rng(cfg.seed);
    let mut params = Matrix::zeros(n, 2);
    let mut native = Matrix::zeros(n, base);
    let mut labels = Vec::with_capacity(n);
    let ground_truth;

    match cfg.kind {
        ManifoldKind::SwissRoll => {
            let (lo, hi) = (1.5 * PI, 4.5 * PI);
            let mut gt = Matrix::zeros(n, 2);
            for i in 0..n {
                let t = lo + (hi - lo) * rng.random::<f64>();
                let h = SWISS_ROLL_HEIGHT * rng.random::<f64>();
                params[(i, 0)] = t;
                params[(i, 1)] = h;
                native[(i, 0)] = t * t.cos();
                native[(i, 1)] = h;
                native[(i, 2)] = t * t.sin();
                gt[(i, 0)] = swiss_roll_arc_length(t);
                gt[(i, 1)] = h;
                labels.push(bin(t, lo, hi));
            }
            ground_truth = gt;
        }
        ManifoldKind::Plane => {
            for i in 0..n {
                params[(i, 0)] = rng.random::<f64>();
                params[(i, 1)] = rng.random::<f64>();
                labels.push(bin(params[(i, 0)], 0.0, 1.0));
            }
            native = whiten(&params)?;
            ground_truth = native.clone();
        }
        ManifoldKind::Sphere => {
            for i in 0..n {
                let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
                let phi = 2.0 * PI * rng.random::<f64>();
                let theta = z.clamp(-1.0, 1.0).acos();
                params[(i, 0)] = theta;
                params[(i, 1)] = phi;
                native[(i, 0)] = theta.sin() * phi.cos();
                native[(i, 1)] = theta.sin() * phi.sin();
                native[(i, 2)] = theta.cos();
                labels.push(bin(theta, 0.0, PI));
            }
            ground_truth = params.clone();
        }
    }

    let frame = if ambient == base {
        None
    } else {
        Some(random_frame(&mut rng, base, ambient))
    };
    let mut features = match &frame {
        Some(f) => &native * f,
        None => native,
    };
    if cfg.noise > 0.0 {
        for r in 0..n {
            for c in 0..ambient {
                let e: f64 = StandardNormal.sample(&mut rng);
                features[(r, c)] += cfg.noise * e;
            }
        }
    }
    let dataset = LabeledDataset::new(cfg.kind.name(), features, &labels)?;
    Ok(SynthManifold {
        dataset,
        params,
        ground_truth,
        frame,
    })
}
