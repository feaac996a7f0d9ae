mod common;

use proptest::prelude::*;
use qlle::numerics::{
    pca_bases, pinv, procrustes_error, smallest_eigvecs, DEFAULT_RANK_TOL,
};
use qlle::Matrix;

#[test]
fn plane_in_r3_has_empty_normal_basis() {
    let xc = Matrix::from_row_slice(4, 3, &[1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, -2.0, 0.0]);
    let b = pca_bases(&xc, 2).unwrap();
    assert_eq!(b.normal.ncols(), 0);
    assert_eq!(b.singular_values.len(), 2);
    assert!(b.singular_values.iter().all(|&s| s > 0.0));
}

#[test]
fn arc_normal_matches_eigen_oracle() {
    let pts: Vec<f64> = (0..8)
        .flat_map(|i| {
            let a = 0.1 * i as f64;
            [a.cos(), a.sin()]
        })
        .collect();
    let x = Matrix::from_row_slice(8, 2, &pts);
    let mean = x.row_mean();
    let xc = Matrix::from_fn(8, 2, |r, c| x[(r, c)] - mean[c]);
    let b = pca_bases(&xc, 1).unwrap();
    assert_eq!(b.normal.ncols(), 1);
    let (_, vecs) = common::jacobi_eigen(&(xc.transpose() * &xc));
    // smallest eigenvector of the scatter matrix is the normal direction
    let dot = b.normal.column(0).dot(&vecs.column(0)).abs();
    assert!((dot - 1.0).abs() < 1e-10, "{dot}");
    let chord = x.row(7) - x.row(0);
    assert!(b.normal.column(0).dot(&chord.transpose()).abs() / chord.norm() < 0.05);
}

#[test]
fn pinv_trivial_cases() {
    let i3 = Matrix::identity(3, 3);
    assert!((pinv(&i3, DEFAULT_RANK_TOL).unwrap() - &i3).amax() < 1e-15);
    let d = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
    let p = pinv(&d, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(p, Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]));
}

#[test]
fn pinv_random_tall() {
    let m = common::gaussian(5, 3, 1);
    let p = pinv(&m, DEFAULT_RANK_TOL).unwrap();
    assert!((&m * &p * &m - &m).amax() < 1e-8);
    let mp = &m * &p;
    assert!((mp.transpose() - &mp).amax() < 1e-8);
}

#[test]
fn eig_diagonal_and_path_laplacian() {
    let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
    let e = smallest_eigvecs(&d, 2).unwrap();
    assert_eq!(e.values, vec![1.0, 2.0]);
    assert!((e.vectors.column(0)[1].abs() - 1.0).abs() < 1e-12);
    assert!((e.vectors.column(1)[2].abs() - 1.0).abs() < 1e-12);

    let l = Matrix::from_row_slice(
        4,
        4,
        &[1.0, -1.0, 0.0, 0.0, -1.0, 2.0, -1.0, 0.0, 0.0, -1.0, 2.0, -1.0, 0.0, 0.0, -1.0, 1.0],
    );
    let e = smallest_eigvecs(&l, 1).unwrap();
    assert!(e.values[0].abs() < 1e-12);
    for v in e.vectors.column(0).iter() {
        assert!((v - 0.5).abs() < 1e-12);
    }
}

#[test]
fn eig_matches_jacobi_on_random_psd() {
    let g = common::gaussian(10, 10, 3);
    let s = &g * g.transpose();
    let e = smallest_eigvecs(&s, 4).unwrap();
    let (vals, vecs) = common::jacobi_eigen(&s);
    for j in 0..4 {
        assert!((e.values[j] - vals[j]).abs() < 1e-9 * vals[9]);
        let dot = e.vectors.column(j).dot(&vecs.column(j)).abs();
        assert!((dot - 1.0).abs() < 1e-8, "pair {j}: {dot}");
    }
}

#[test]
fn eig_rejects_asymmetric() {
    let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
    assert!(smallest_eigvecs(&m, 1).is_err());
}

#[test]
fn procrustes_identity_and_rotation() {
    let a = common::gaussian(30, 2, 4);
    assert!(procrustes_error(&a, &a).unwrap() < 1e-12);
    let rot = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let mut b = &a * rot;
    b.add_scalar_mut(5.0);
    assert!(procrustes_error(&a, &b).unwrap() < 1e-10);
}

#[test]
fn procrustes_noise_matches_oracle() {
    let a = common::gaussian(200, 2, 5);
    let b = &a + common::gaussian(200, 2, 6) * 0.01;
    let got = procrustes_error(&a, &b).unwrap();
    let want = common::procrustes_oracle(&a, &b);
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    assert!(got > 0.003 && got < 0.03, "{got}");
}

fn matrix_strategy(max_r: usize, max_c: usize) -> impl Strategy<Value = (Matrix, usize)> {
    (1..=max_r, 1..=max_c, any::<u64>()).prop_flat_map(|(r, c, seed)| {
        (1..=r.min(c)).prop_map(move |rank| {
            let m = common::gaussian(r, rank, seed) * common::gaussian(rank, c, seed ^ 0x5a5a);
            (m, rank)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn penrose_conditions((a, _rank) in matrix_strategy(20, 15)) {
        let x = pinv(&a, DEFAULT_RANK_TOL).unwrap();
        let ax = &a * &x;
        let xa = &x * &a;
        prop_assert!((&ax * &a - &a).norm() <= 1e-8 * a.norm());
        prop_assert!((&xa * &x - &x).norm() <= 1e-8 * x.norm());
        prop_assert!((ax.transpose() - &ax).norm() <= 1e-8 * ax.norm().max(1.0));
        prop_assert!((xa.transpose() - &xa).norm() <= 1e-8 * xa.norm().max(1.0));
    }

    #[test]
    fn pca_bases_orthonormal_and_complete((a, rank) in matrix_strategy(12, 8)) {
        let mean = a.row_mean();
        let xc = Matrix::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)] - mean[c]);
        let d = 1.min(rank);
        prop_assume!(xc.norm() > 1e-6 && d <= xc.nrows().min(xc.ncols()));
        let b = pca_bases(&xc, d).unwrap();
        let basis = Matrix::from_fn(xc.ncols(), b.tangent.ncols() + b.normal.ncols(), |r, c| {
            if c < d { b.tangent[(r, c)] } else { b.normal[(r, c - d)] }
        });
        let gram = basis.transpose() * &basis;
        prop_assert!((gram - Matrix::identity(basis.ncols(), basis.ncols())).amax() < 1e-8);
        let recon = &xc * &basis * basis.transpose();
        prop_assert!((recon - &xc).amax() <= 1e-8 * xc.amax().max(1.0));
        for w in b.singular_values.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn eigvecs_orthonormal_and_sorted(seed in any::<u64>(), n in 2usize..12) {
        let g = common::gaussian(n, n, seed);
        let s = &g + g.transpose();
        let e = smallest_eigvecs(&s, n).unwrap();
        let gram = e.vectors.transpose() * &e.vectors;
        prop_assert!((gram - Matrix::identity(n, n)).amax() < 1e-8);
        for w in e.values.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn procrustes_invariant_to_similarity(seed in any::<u64>(), angle in 0.0f64..std::f64::consts::TAU, scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let a = common::gaussian(25, 2, seed);
        let b = &a + common::gaussian(25, 2, seed ^ 1) * 0.1;
        let base = procrustes_error(&a, &b).unwrap();
        let rot = Matrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
        let mut moved = &b * rot * scale;
        moved.add_scalar_mut(shift);
        prop_assert!((procrustes_error(&a, &moved).unwrap() - base).abs() <= 1e-10);
    }
}
