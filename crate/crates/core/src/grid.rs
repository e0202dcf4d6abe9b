//! Uniform node-centred grids, scalar fields on them, and the tridiagonal
//! kernel shared by the marching schemes.
//!
//! The grid covers the square `(-L/2, L/2) x (-L/2, L/2)`. Node `(i, j)` sits at
//! `(-L/2 + i*dx, -L/2 + j*dy)`; boundary nodes are part of the grid and carry
//! the Dirichlet values. Field arrays are stored row-major with `i` (the
//! propagation axis `x`) as the slow index.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    n_x: usize,
    n_y: usize,
    length: f64,
}

impl Grid2D {
    pub fn new(n_x: usize, n_y: usize, length: f64) -> Result<Self> {
        if n_x < 2 || n_y < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 nodes per axis, got {n_x}x{n_y}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "domain length must be positive, got {length}"
            )));
        }
        Ok(Self { n_x, n_y, length })
    }

    pub fn square(n: usize, length: f64) -> Result<Self> {
        Self::new(n, n, length)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.n_x - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.length / (self.n_y - 1) as f64
    }

    pub fn cell_measure(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_x, self.n_y)
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.dy()
    }

    /// Fractional node coordinates of a physical point.
    pub fn to_index(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x + 0.5 * self.length) / self.dx(),
            (y + 0.5 * self.length) / self.dy(),
        )
    }

    pub(crate) fn ensure_same(&self, other: &Grid2D) -> Result<()> {
        if self.n_x != other.n_x || self.n_y != other.n_y || self.length != other.length {
            return Err(Error::GridMismatch(format!(
                "{}x{} (L={}) vs {}x{} (L={})",
                self.n_x, self.n_y, self.length, other.n_x, other.n_y, other.length
            )));
        }
        Ok(())
    }
}

/// Real scalar field on a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid2D,
    values: Array2<f64>,
}

impl RealField {
    pub fn new(grid: Grid2D, values: Array2<f64>) -> Result<Self> {
        check_shape(&grid, values.dim())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("real field"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: Array2::zeros(grid.shape()),
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(grid.x(i), grid.y(j)));
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_measure()).sqrt()
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self.values.mapv(|v| Complex64::new(v, 0.0)),
        }
    }

    /// Bilinear interpolation at a physical point; zero outside the grid.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (fi, fj) = self.grid.to_index(x, y);
        bilinear(&self.values, fi, fj)
    }

    /// Weighted L2 pairing `sum a*b * dx*dy`.
    pub fn inner(&self, other: &RealField) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_measure())
    }
}

/// Complex scalar field on a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid2D,
    values: Array2<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid2D, values: Array2<Complex64>) -> Result<Self> {
        check_shape(&grid, values.dim())?;
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite("complex field"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: Array2::zeros(grid.shape()),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }

    pub fn re(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.mapv(|v| v.re),
        }
    }

    pub fn im(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.mapv(|v| v.im),
        }
    }

    pub fn modulus(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.mapv(|v| v.norm()),
        }
    }

    /// `<a, b> = sum a * conj(b) * dx*dy`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        l2_inner(
            self.values.as_slice().expect("standard layout"),
            other.values.as_slice().expect("standard layout"),
            self.grid.cell_measure(),
        )
    }

    pub fn norm(&self) -> f64 {
        self.inner(self)
            .map(|c| c.re.max(0.0).sqrt())
            .unwrap_or(0.0)
    }
}

fn check_shape(grid: &Grid2D, dim: (usize, usize)) -> Result<()> {
    if dim != grid.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", grid.n_x(), grid.n_y()),
            got: format!("{}x{}", dim.0, dim.1),
        });
    }
    Ok(())
}

/// Bilinear interpolation on fractional node indices; zero outside `[0, n-1]`.
pub(crate) fn bilinear(values: &Array2<f64>, fi: f64, fj: f64) -> f64 {
    let (n_x, n_y) = values.dim();
    let max_i = (n_x - 1) as f64;
    let max_j = (n_y - 1) as f64;
    if !(fi >= 0.0 && fi <= max_i && fj >= 0.0 && fj <= max_j) {
        return 0.0;
    }
    let i0 = (fi.floor() as usize).min(n_x - 2);
    let j0 = (fj.floor() as usize).min(n_y - 2);
    let ti = fi - i0 as f64;
    let tj = fj - j0 as f64;
    (1.0 - ti) * (1.0 - tj) * values[[i0, j0]]
        + ti * (1.0 - tj) * values[[i0 + 1, j0]]
        + (1.0 - ti) * tj * values[[i0, j0 + 1]]
        + ti * tj * values[[i0 + 1, j0 + 1]]
}

/// Weighted pairing `sum a_k * conj(b_k) * measure`, conjugate-linear in `b`.
pub fn l2_inner(a: &[Complex64], b: &[Complex64], measure: f64) -> Result<Complex64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: a.len().to_string(),
            got: b.len().to_string(),
        });
    }
    let sum: Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    Ok(sum * measure)
}

/// Tridiagonal matrix with sub-, main and super-diagonal bands.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl TridiagonalSystem {
    pub fn new(lower: Vec<Complex64>, diag: Vec<Complex64>, upper: Vec<Complex64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || lower.len() + 1 != n || upper.len() + 1 != n {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "bands ({}, {n}, {})",
                    n.saturating_sub(1),
                    n.saturating_sub(1)
                ),
                got: format!("({}, {n}, {})", lower.len(), upper.len()),
            });
        }
        Ok(Self { lower, diag, upper })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    pub fn conj_transpose(&self) -> Self {
        Self {
            lower: self.upper.iter().map(|c| c.conj()).collect(),
            diag: self.diag.iter().map(|c| c.conj()).collect(),
            upper: self.lower.iter().map(|c| c.conj()).collect(),
        }
    }

    fn max_coefficient(&self) -> f64 {
        self.lower
            .iter()
            .chain(&self.diag)
            .chain(&self.upper)
            .fold(0.0_f64, |m, c| m.max(c.norm()))
    }

    /// Runs the Thomas forward elimination once so repeated solves cost O(n).
    pub fn factor(&self) -> Result<TridiagonalFactor> {
        let n = self.len();
        let tol = 1e-14 * self.max_coefficient();
        let mut inv_pivot = Vec::with_capacity(n);
        let mut upper_scaled = Vec::with_capacity(n.saturating_sub(1));
        let mut pivot = self.diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = self.diag[i] - self.lower[i - 1] * upper_scaled[i - 1];
            }
            if !(pivot.norm() > tol) {
                return Err(Error::SingularPivot {
                    row: i,
                    magnitude: pivot.norm(),
                });
            }
            let inv = pivot.inv();
            inv_pivot.push(inv);
            if i + 1 < n {
                upper_scaled.push(self.upper[i] * inv);
            }
        }
        Ok(TridiagonalFactor {
            lower: self.lower.clone(),
            inv_pivot,
            upper_scaled,
        })
    }
}

/// Thomas-factored tridiagonal system.
#[derive(Debug, Clone)]
pub struct TridiagonalFactor {
    lower: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
    upper_scaled: Vec<Complex64>,
}

impl TridiagonalFactor {
    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Solves in place: on return `x` holds the solution for right-hand side `x`.
    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i - 1] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.upper_scaled[i] * x[i + 1];
        }
    }
}

/// Solves `sys * u = rhs` by Thomas elimination.
pub fn tridiag_solve(sys: &TridiagonalSystem, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    if rhs.len() != sys.len() {
        return Err(Error::ShapeMismatch {
            expected: sys.len().to_string(),
            got: rhs.len().to_string(),
        });
    }
    let factor = sys.factor()?;
    let mut x = rhs.to_vec();
    factor.solve_in_place(&mut x);
    Ok(x)
}
