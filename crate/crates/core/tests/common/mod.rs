//! Independent reference implementations used as test oracles. None of these
//! call into the library's numerics.

#![allow(dead_code)]

use qlle::Matrix;

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng(seed);
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
}

/// Cyclic Jacobi eigendecomposition. Values ascending, vectors as columns.
pub fn jacobi_eigen(s: &Matrix) -> (Vec<f64>, Matrix) {
    let n = s.nrows();
    let mut a = s.clone();
    let mut v = Matrix::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * a.norm().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Gaussian elimination with partial pivoting; `b` may have several columns.
pub fn gauss_solve(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.nrows();
    let m = b.ncols();
    let mut a = a.clone();
    let mut b = b.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .unwrap();
        a.swap_rows(col, piv);
        b.swap_rows(col, piv);
        let d = a[(col, col)];
        assert!(d.abs() > 1e-300, "singular system");
        for r in col + 1..n {
            let f = a[(r, col)] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[(r, c)] -= f * a[(col, c)];
            }
            for c in 0..m {
                b[(r, c)] -= f * b[(col, c)];
            }
        }
    }
    let mut x = Matrix::zeros(n, m);
    for c in 0..m {
        for r in (0..n).rev() {
            let mut acc = b[(r, c)];
            for k in r + 1..n {
                acc -= a[(r, k)] * x[(k, c)];
            }
            x[(r, c)] = acc / a[(r, r)];
        }
    }
    x
}

/// Flips each column so its largest-magnitude entry (first on ties) is positive.
pub fn sign_fix(m: &mut Matrix) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for i in 0..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Aligns the signs of `b`'s columns to `a` by inner product.
pub fn align_signs(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = b.clone();
    for c in 0..a.ncols() {
        if a.column(c).dot(&b.column(c)) < 0.0 {
            out.column_mut(c).neg_mut();
        }
    }
    out
}

/// Full sort of all pairwise distances; `(index, squared distance)` ascending, ties by index.
pub fn brute_neighbors(x: &Matrix, i: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..x.nrows())
        .filter(|&j| j != i)
        .map(|j| (j, (x.row(i) - x.row(j)).norm_squared()))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all
}

/// Sum-to-one weights through the classical `G w = 1` route, Tikhonov `reg·tr(G)`.
pub fn lle_weights(x: &Matrix, i: usize, nbrs: &[usize], reg: f64) -> Vec<f64> {
    let k = nbrs.len();
    let g = Matrix::from_fn(k, k, |a, b| {
        (x.row(nbrs[a]) - x.row(i)).dot(&(x.row(nbrs[b]) - x.row(i)))
    });
    let tr = g.trace();
    let mut g = g;
    if reg > 0.0 {
        for a in 0..k {
            g[(a, a)] += reg * tr;
        }
    }
    let w = gauss_solve(&g, &Matrix::from_element(k, 1, 1.0));
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// Constrained least squares by eliminating the last weight:
/// `w_k = 1 − Σ_{j<k} w_j`, then the reduced normal equations.
pub fn constrained_ls_weights(x: &Matrix, i: usize, nbrs: &[usize]) -> Vec<f64> {
    let k = nbrs.len();
    let last = x.row(nbrs[k - 1]);
    let target = (x.row(i) - last).transpose();
    let a = Matrix::from_fn(x.ncols(), k - 1, |r, c| x[(nbrs[c], r)] - last[r]);
    let ata = a.transpose() * &a;
    let atb = a.transpose() * Matrix::from_column_slice(target.len(), 1, target.as_slice());
    let sol = gauss_solve(&ata, &atb);
    let mut w: Vec<f64> = sol.iter().copied().collect();
    w.push(1.0 - w.iter().sum::<f64>());
    w
}

/// Plain LLE: brute-force neighbors, `G w = 1` weights, Jacobi eigensolve,
/// constant eigenvector dropped, columns centered and scaled to `YᵀY = N·I`.
pub fn plain_lle(x: &Matrix, k: usize, reg: f64, d: usize) -> Matrix {
    let n = x.nrows();
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        let nbrs: Vec<usize> = brute_neighbors(x, i).iter().take(k).map(|p| p.0).collect();
        for (j, wt) in nbrs.iter().zip(lle_weights(x, i, &nbrs, reg)) {
            w[(i, *j)] = wt;
        }
    }
    let iw = Matrix::identity(n, n) - w;
    let m = iw.transpose() * iw;
    let (_, vecs) = jacobi_eigen(&m);
    let mut y = Matrix::from_fn(n, d, |r, c| vecs[(r, c + 1)]);
    for mut col in y.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let s = (n as f64).sqrt() / col.norm();
        col *= s;
    }
    sign_fix(&mut y);
    y
}

/// Minimum-norm least squares through the normal equations:
/// `Hᵀ(HHᵀ)⁻¹Y` when H has full row rank, else `(HᵀH)⁻¹HᵀY`.
pub fn normal_equations_ls(h: &Matrix, y: &Matrix) -> Matrix {
    if h.nrows() <= h.ncols() {
        let hht = h * h.transpose();
        h.transpose() * gauss_solve(&hht, y)
    } else {
        let hth = h.transpose() * h;
        gauss_solve(&hth, &(h.transpose() * y))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Leave-one-in precision by fully sorting every other sample.
pub fn brute_precision(y: &Matrix, labels: &[usize], returns: usize) -> (f64, Vec<f64>) {
    let per: Vec<f64> = (0..y.nrows())
        .map(|q| {
            let hits = brute_neighbors(y, q)
                .iter()
                .take(returns)
                .filter(|(j, _)| labels[*j] == labels[q])
                .count();
            hits as f64 / returns as f64
        })
        .collect();
    (per.iter().sum::<f64>() / per.len() as f64, per)
}

/// Covariance eigendecomposition: top-`d` eigenvalues, descending.
pub fn covariance_top_eigs(x: &Matrix, d: usize) -> Vec<f64> {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let xc = Matrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] - mean[c]);
    let cov = xc.transpose() * xc / n;
    let (vals, _) = jacobi_eigen(&cov);
    vals.iter().rev().take(d).copied().collect()
}

/// Orthogonal Procrustes by an explicit SVD of `AᵀB` with similarity scale.
pub fn procrustes_oracle(a: &Matrix, b: &Matrix) -> f64 {
    let center = |m: &Matrix| {
        let mean = m.row_mean();
        Matrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] - mean[c])
    };
    let a0 = center(a);
    let b0 = center(b);
    let svd = (b0.transpose() * &a0).svd(true, true);
    let r = svd.u.unwrap() * svd.v_t.unwrap();
    let s = svd.singular_values.sum() / b0.norm_squared();
    (a0 - b0 * r * s).norm() / center(a).norm()
}
