//! Dense linear-algebra primitives shared by the embedding, ELM and PCA code.
//!
//! Everything here is a pure function of its inputs. Matrices are nalgebra
//! types; SVD and symmetric eigendecompositions run through faer on a single
//! thread. This module adds ordering, rank cut-offs and sign canonicalization
//! so results are reproducible bit-for-bit.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::svd::{self, ComputeSvdVectors};
use faer::{Mat, MatRef, Par};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-major-by-convention dense matrix: rows are samples, columns are features.
pub type Matrix = DMatrix<f64>;

/// Default relative cut-off for numerical rank and pseudo-inverse truncation.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Builds a matrix from row-major data, rejecting NaN and infinities.
pub fn matrix_from_rows(rows: usize, cols: usize, data: &[f64]) -> Result<Matrix> {
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            what: "row-major buffer",
            expected: rows * cols,
            found: data.len(),
        });
    }
    let m = Matrix::from_row_slice(rows, cols, data);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

pub fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(Error::NonFinite { what, row: r, col: c });
            }
        }
    }
    Ok(())
}

/// Flips a vector so its largest-magnitude entry is positive (first one on ties).
pub fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if best_abs > 0.0 && v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn canonicalize_columns(m: &mut Matrix) {
    for mut col in m.column_iter_mut() {
        canonicalize_sign(col.as_mut_slice());
    }
}

fn to_faer(m: &Matrix) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

fn from_faer(m: MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// Thin SVD with singular values sorted in nonincreasing order.
pub(crate) struct SortedSvd {
    pub u: Option<Matrix>,
    pub sigma: Vec<f64>,
    /// Right singular vectors as columns.
    pub v: Matrix,
}

/// Runs single-threaded so results do not depend on the worker count.
pub(crate) fn sorted_svd(m: &Matrix, want_u: bool) -> Result<SortedSvd> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    let u_mode = if want_u { ComputeSvdVectors::Thin } else { ComputeSvdVectors::No };
    let mut s = Diag::<f64>::zeros(k);
    let mut u = Mat::<f64>::zeros(if want_u { rows } else { 0 }, if want_u { k } else { 0 });
    let mut v = Mat::<f64>::zeros(cols, k);
    let mut buf = MemBuffer::new(svd::svd_scratch::<f64>(
        rows,
        cols,
        u_mode,
        ComputeSvdVectors::Thin,
        Par::Seq,
        Default::default(),
    ));
    svd::svd(
        to_faer(m).as_ref(),
        s.as_mut(),
        want_u.then(|| u.as_mut()),
        Some(v.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Eigen(format!("svd did not converge: {e:?}")))?;
    let raw: Vec<f64> = s.column_vector().iter().copied().collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]).then(a.cmp(&b)));
    let sigma = order.iter().map(|&i| raw[i]).collect();
    let v = Matrix::from_fn(cols, k, |r, c| v[(r, order[c])]);
    let u = want_u.then(|| Matrix::from_fn(rows, k, |r, c| u[(r, order[c])]));
    Ok(SortedSvd { u, sigma, v })
}

/// Symmetric eigendecomposition, eigenvalues ascending. Single-threaded.
fn symmetric_eigen(s: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = s.nrows();
    let mut vals = Diag::<f64>::zeros(n);
    let mut u = Mat::<f64>::zeros(n, n);
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        Par::Seq,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        to_faer(s).as_ref(),
        vals.as_mut(),
        Some(u.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Eigen(format!("eigensolver did not converge: {e:?}")))?;
    Ok((vals.column_vector().iter().copied().collect(), from_faer(u.as_ref())))
}

fn numerical_rank(sigma: &[f64], tol: f64) -> usize {
    let max = sigma.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sigma.iter().take_while(|&&s| s > tol * max).count()
}

/// Local principal bases of a centered neighborhood.
#[derive(Debug, Clone)]
pub struct PcaBases {
    /// D×d, top-d principal directions.
    pub tangent: Matrix,
    /// D×(rank−d), remaining principal directions; may have zero columns.
    pub normal: Matrix,
    /// Nonzero singular values (length = numerical rank), nonincreasing.
    pub singular_values: Vec<f64>,
}

/// Splits the principal directions of centered rows `xc` (k×D) into the
/// top-`d` tangent space and its complement within the row space.
///
/// The caller centers the data.
pub fn pca_bases(xc: &Matrix, d: usize) -> Result<PcaBases> {
    pca_bases_with_tol(xc, d, DEFAULT_RANK_TOL)
}

pub fn pca_bases_with_tol(xc: &Matrix, d: usize, tol: f64) -> Result<PcaBases> {
    let (k, dim) = xc.shape();
    if d == 0 || d > k.min(dim) {
        return Err(Error::InvalidArgument(format!(
            "target dimension {d} must be in 1..={}",
            k.min(dim)
        )));
    }
    ensure_finite(xc, "centered neighborhood")?;
    let svd = sorted_svd(xc, false)?;
    let rank = numerical_rank(&svd.sigma, tol);
    let mut tangent = svd.v.columns(0, d).into_owned();
    let mut normal = if rank > d {
        svd.v.columns(d, rank - d).into_owned()
    } else {
        Matrix::zeros(dim, 0)
    };
    canonicalize_columns(&mut tangent);
    canonicalize_columns(&mut normal);
    Ok(PcaBases {
        tangent,
        normal,
        singular_values: svd.sigma[..rank].to_vec(),
    })
}

/// Moore–Penrose pseudo-inverse via SVD, dropping singular values at or
/// below `tol · σ_max`.
pub fn pinv(m: &Matrix, tol: f64) -> Result<Matrix> {
    ensure_finite(m, "pinv input")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Matrix::zeros(cols, rows));
    }
    let svd = sorted_svd(m, true)?;
    let u = svd.u.expect("requested");
    let rank = numerical_rank(&svd.sigma, tol);
    // V_r · diag(1/σ) · U_rᵀ
    let mut v_scaled = svd.v.columns(0, rank).into_owned();
    for (j, mut col) in v_scaled.column_iter_mut().enumerate() {
        col /= svd.sigma[j];
    }
    Ok(v_scaled * u.columns(0, rank).transpose())
}

/// Ridge-regularized least squares `argmin ‖Mβ − Y‖² + λ‖β‖²` through one SVD.
///
/// `lambda = 0` gives the minimum-norm solution `M†Y` with the usual `tol` cut-off.
pub fn ridge_solve(m: &Matrix, y: &Matrix, lambda: f64, tol: f64) -> Result<Matrix> {
    if m.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            what: "least-squares right-hand side",
            expected: m.nrows(),
            found: y.nrows(),
        });
    }
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {lambda}")));
    }
    ensure_finite(m, "least-squares matrix")?;
    ensure_finite(y, "least-squares target")?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Matrix::zeros(m.ncols(), y.ncols()));
    }
    let svd = sorted_svd(m, true)?;
    let u = svd.u.expect("requested");
    let rank = numerical_rank(&svd.sigma, tol);
    let uty = u.columns(0, rank).transpose() * y;
    let mut scaled = uty;
    for (j, mut row) in scaled.row_iter_mut().enumerate() {
        let s = svd.sigma[j];
        row *= s / (s * s + lambda);
    }
    Ok(svd.v.columns(0, rank) * scaled)
}

/// Bottom eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Nondecreasing.
    pub values: Vec<f64>,
    /// One orthonormal eigenvector per column, sign-canonicalized.
    pub vectors: Matrix,
}

/// Maximum absolute asymmetry tolerated by the symmetric eigensolver,
/// relative to `max(1, max |s_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Returns the `m` algebraically smallest eigenpairs of symmetric `s`.
pub fn smallest_eigvecs(s: &Matrix, m: usize) -> Result<EigenPairs> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "square matrix",
            expected: n,
            found: s.ncols(),
        });
    }
    if m > n {
        return Err(Error::InvalidArgument(format!(
            "requested {m} eigenpairs of a {n}x{n} matrix"
        )));
    }
    ensure_finite(s, "symmetric matrix")?;
    let scale = s.amax().max(1.0);
    let mut asym = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let (eigenvalues, eigenvectors) = symmetric_eigen(s)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]).then(a.cmp(&b)));
    order.truncate(m);
    let values = order.iter().map(|&i| eigenvalues[i]).collect();
    let mut vectors = Matrix::from_fn(n, m, |r, c| eigenvectors[(r, order[c])]);
    canonicalize_columns(&mut vectors);
    Ok(EigenPairs { values, vectors })
}

/// Largest eigenpairs, in nonincreasing order of eigenvalue.
pub fn largest_eigvecs(s: &Matrix, m: usize) -> Result<EigenPairs> {
    let neg = -s;
    let mut pairs = smallest_eigvecs(&neg, m)?;
    pairs.values.iter_mut().for_each(|v| *v = -*v);
    Ok(pairs)
}

fn column_means(m: &Matrix) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// Subtracts the column means, returning the centered copy and the means.
pub fn center_columns(m: &Matrix) -> (Matrix, DVector<f64>) {
    let mean = column_means(m);
    let mut centered = m.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    (centered, mean)
}

/// Relative residual of the best similarity alignment of `b` onto `a`:
///
/// `min_{Q orthogonal, s, t} ‖A − (s·B·Q + t)‖_F / ‖A − mean(A)‖_F`.
pub fn procrustes_error(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            what: "procrustes operands",
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.nrows() < a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "procrustes needs at least as many points ({}) as dimensions ({})",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite(a, "procrustes target")?;
    ensure_finite(b, "procrustes source")?;
    let (a0, _) = center_columns(a);
    let (b0, _) = center_columns(b);
    let a_norm = a0.norm();
    if a_norm == 0.0 {
        return Err(Error::InvalidArgument("procrustes target has zero variance".into()));
    }
    let b_norm2 = b0.norm_squared();
    if b_norm2 == 0.0 {
        return Ok(1.0);
    }
    // B0ᵀA0 = UΣVᵀ, Q = UVᵀ, s = tr Σ / ‖B0‖²
    let cross = b0.transpose() * &a0;
    let svd = sorted_svd(&cross, true)?;
    let q = svd.u.expect("requested") * svd.v.transpose();
    let s = svd.sigma.iter().sum::<f64>() / b_norm2;
    let residual = a0 - (b0 * q) * s;
    Ok(residual.norm() / a_norm)
}
