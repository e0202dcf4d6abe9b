mod common;

use ndarray::Array2;
use num_complex::Complex64;
use paraxial_tomo::grid::{l2_inner, tridiag_solve, TridiagonalSystem};
use paraxial_tomo::{ComplexField, Error, Grid2D};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c(a, b)), n)
}

fn to_dense(sys: &TridiagonalSystem) -> Array2<Complex64> {
    let n = sys.len();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        a[[i, i]] = sys.diag[i];
        if i + 1 < n {
            a[[i + 1, i]] = sys.lower[i];
            a[[i, i + 1]] = sys.upper[i];
        }
    }
    a
}

#[test]
fn identity_system() {
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let sys = TridiagonalSystem::new(vec![zero; 2], vec![one; 3], vec![zero; 2]).unwrap();
    let rhs = vec![c(3.0, 0.0), c(-1.0, 0.0), c(0.0, 2.0)];
    assert_eq!(tridiag_solve(&sys, &rhs).unwrap(), rhs);
}

#[test]
fn two_by_two_by_hand() {
    let sys =
        TridiagonalSystem::new(vec![c(1.0, 0.0)], vec![c(2.0, 0.0); 2], vec![c(1.0, 0.0)]).unwrap();
    let x = tridiag_solve(&sys, &[c(3.0, 0.0), c(3.0, 0.0)]).unwrap();
    for v in x {
        assert!((v - c(1.0, 0.0)).norm() < 1e-15);
    }
}

#[test]
fn singular_pivot_reported() {
    let sys = TridiagonalSystem::new(
        vec![c(1.0, 0.0)],
        vec![c(1.0, 0.0), c(1.0, 0.0)],
        vec![c(1.0, 0.0)],
    )
    .unwrap();
    assert!(matches!(
        tridiag_solve(&sys, &[c(1.0, 0.0), c(1.0, 0.0)]),
        Err(Error::SingularPivot { row: 1, .. })
    ));
}

#[test]
fn impulse_inner_is_cell_measure() {
    let grid = Grid2D::new(5, 7, 2.0).unwrap();
    let mut v = Array2::zeros(grid.shape());
    v[[2, 3]] = c(1.0, 0.0);
    let f = ComplexField::new(grid, v).unwrap();
    let ip = f.inner(&f).unwrap();
    assert!((ip - c(grid.dx() * grid.dy(), 0.0)).norm() < 1e-15);
    assert!((grid.dx() - 0.5).abs() < 1e-15);
    assert!((grid.dy() - 2.0 / 6.0).abs() < 1e-15);
    let z = ComplexField::zeros(grid);
    assert_eq!(z.inner(&z).unwrap(), c(0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tridiag_matches_dense_lu(
        lower in complex_vec(63),
        diag in complex_vec(64),
        upper in complex_vec(63),
        rhs in complex_vec(64),
    ) {
        // diagonal dominance keeps the condition number modest
        let diag: Vec<_> = diag.into_iter().map(|d| d + c(4.0, 0.0)).collect();
        let sys = TridiagonalSystem::new(lower, diag, upper).unwrap();
        let x = tridiag_solve(&sys, &rhs).unwrap();
        let oracle = common::dense_solve(to_dense(&sys), rhs.clone());
        prop_assert!(common::rel_l2(&x, &oracle) <= 1e-12);
        let back = sys.apply(&x);
        prop_assert!(common::rel_l2(&back, &rhs) <= 1e-12);
    }

    #[test]
    fn inner_is_hermitian(a in complex_vec(40), b in complex_vec(40), m in 0.01..10.0f64) {
        let ab = l2_inner(&a, &b, m).unwrap();
        let ba = l2_inner(&b, &a, m).unwrap();
        prop_assert!((ab - ba.conj()).norm() <= 1e-14 * (1.0 + ab.norm()));
        let aa = l2_inner(&a, &a, m).unwrap();
        prop_assert!(aa.im == 0.0 || aa.im.abs() <= 1e-15 * aa.re);
        prop_assert!(aa.re >= 0.0);
    }
}

#[test]
fn inner_shape_mismatch() {
    let a = vec![c(1.0, 0.0); 3];
    let b = vec![c(1.0, 0.0); 4];
    assert!(matches!(l2_inner(&a, &b, 1.0), Err(Error::ShapeMismatch { .. })));
}
