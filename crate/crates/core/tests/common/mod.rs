#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<Complex64> {
    Array2::from_shape_simple_fn(shape, || {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_real(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.gen_range(-1.0..1.0))
}

/// Dense Gaussian elimination with partial pivoting; `a` is row-major.
pub fn dense_solve(mut a: Array2<Complex64>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[[i, k]].norm().partial_cmp(&a[[j, k]].norm()).unwrap())
            .unwrap();
        if p != k {
            for c in 0..n {
                a.swap([k, c], [p, c]);
            }
            b.swap(k, p);
        }
        let piv = a[[k, k]];
        for i in k + 1..n {
            let f = a[[i, k]] / piv;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in k..n {
                let v = a[[k, c]];
                a[[i, c]] -= f * v;
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for c in i + 1..n {
            s -= a[[i, c]] * x[c];
        }
        x[i] = s / a[[i, i]];
    }
    x
}

pub fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn rel_l2_real(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Dense LU factorisation with partial pivoting, for repeated solves.
pub struct DenseLu {
    lu: Array2<Complex64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn new(mut a: Array2<Complex64>) -> Self {
        let n = a.nrows();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[[i, k]].norm().partial_cmp(&a[[j, k]].norm()).unwrap())
                .unwrap();
            if p != k {
                for c in 0..n {
                    a.swap([k, c], [p, c]);
                }
                perm.swap(k, p);
            }
            let piv = a[[k, k]];
            for i in k + 1..n {
                let f = a[[i, k]] / piv;
                a[[i, k]] = f;
                for c in k + 1..n {
                    let v = a[[k, c]];
                    a[[i, c]] -= f * v;
                }
            }
        }
        Self { lu: a, perm }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = b.len();
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for c in 0..i {
                let v = self.lu[[i, c]] * y[c];
                y[i] -= v;
            }
        }
        for i in (0..n).rev() {
            for c in i + 1..n {
                let v = self.lu[[i, c]] * y[c];
                y[i] -= v;
            }
            y[i] /= self.lu[[i, i]];
        }
        y
    }
}

pub fn matvec(a: &Array2<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    a.rows()
        .into_iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}
