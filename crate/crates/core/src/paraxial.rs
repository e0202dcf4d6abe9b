//! Forward model: Crank-Nicolson march of the paraxial envelope equation
//!
//! ```text
//! dv/dx + 1/(4ik) d2v/dy2 = beta,   v(-L/2, y) = 0,   v(x, +-L/2) = 0
//! ```
//!
//! across the square domain, and assembly of the transmission sinogram
//! `W[beta](theta, y) = v_theta(L/2, y)` where `v_theta` is driven by the
//! rotated source `beta o R_theta`.
//!
//! Each slice update solves
//! `(I + dx/2 A) v_{j+1} = (I - dx/2 A) v_j + dx (beta_j + beta_{j+1}) / 2`
//! on the interior transverse nodes, with `A = 1/(4ik) D_yy`. `A` is
//! anti-Hermitian so the homogeneous step is unitary.
//!
//! The propagating field is the second harmonic; `k` is the fundamental
//! wavenumber, kept in the `1/(4ik)` coefficient as written.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid2D, RealField, TridiagonalFactor, TridiagonalSystem};
use crate::phantom::{rotate_complex, RotationOperator};

/// Physical configuration: domain side `L` and the ratio `L / lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveParams {
    length: f64,
    l_over_lambda: f64,
}

impl WaveParams {
    pub fn new(length: f64, l_over_lambda: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "length must be positive, got {length}"
            )));
        }
        if !(l_over_lambda.is_finite() && l_over_lambda > 0.0) {
            return Err(Error::InvalidInput(format!(
                "L/lambda must be positive, got {l_over_lambda}"
            )));
        }
        Ok(Self {
            length,
            l_over_lambda,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn l_over_lambda(&self) -> f64 {
        self.l_over_lambda
    }

    pub fn wavelength(&self) -> f64 {
        self.length / self.l_over_lambda
    }

    /// Fundamental wavenumber `k = 2 pi / lambda`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI * self.l_over_lambda / self.length
    }

    fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if (grid.length() - self.length).abs() > 1e-12 * self.length {
            return Err(Error::GridMismatch(format!(
                "grid length {} differs from wave length {}",
                grid.length(),
                self.length
            )));
        }
        Ok(())
    }
}

/// `n` equally spaced angles `k * 2pi / n`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

/// Angles at `step_deg` spacing starting from zero, `count` of them.
pub fn stepped_angles(count: usize, step_deg: f64) -> Vec<f64> {
    (0..count)
        .map(|k| (k as f64 * step_deg).to_radians())
        .collect()
}

/// Complex transmission data indexed by `(angle, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    angles: Vec<f64>,
    values: Array2<Complex64>,
    params: WaveParams,
}

impl Sinogram {
    pub fn new(angles: Vec<f64>, values: Array2<Complex64>, params: WaveParams) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidInput("sinogram has no angles".into()));
        }
        if angles
            .iter()
            .any(|a| !(a.is_finite() && *a >= 0.0 && *a < 2.0 * PI))
        {
            return Err(Error::InvalidInput("angles must lie in [0, 2pi)".into()));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "angles must be strictly increasing".into(),
            ));
        }
        if values.nrows() != angles.len() || values.ncols() < 2 {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x n_y (n_y >= 2)", angles.len()),
                got: format!("{} x {}", values.nrows(), values.ncols()),
            });
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite("sinogram"));
        }
        Ok(Self {
            angles,
            values,
            params,
        })
    }

    pub fn zeros(angles: Vec<f64>, n_y: usize, params: WaveParams) -> Result<Self> {
        let n = angles.len();
        Self::new(angles, Array2::zeros((n, n_y)), params)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn n_y(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn params(&self) -> &WaveParams {
        &self.params
    }

    /// Square reconstruction grid matching the transverse sampling.
    pub fn grid(&self) -> Grid2D {
        Grid2D::square(self.n_y(), self.params.length).expect("validated sinogram")
    }

    /// Quadrature weight of one angle: the rectangle rule over the full circle.
    pub fn angle_weight(&self) -> f64 {
        2.0 * PI / self.angles.len() as f64
    }

    pub fn dy(&self) -> f64 {
        self.params.length / (self.n_y() - 1) as f64
    }

    /// `<a, b> = sum a * conj(b) * dtheta * dy`.
    pub fn inner(&self, other: &Sinogram) -> Result<Complex64> {
        if self.values.dim() != other.values.dim() || self.params != other.params {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.values.dim()),
                got: format!("{:?}", other.values.dim()),
            });
        }
        let s: Complex64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s * self.angle_weight() * self.dy())
    }

    pub fn norm(&self) -> f64 {
        self.inner(self)
            .map(|c| c.re.max(0.0).sqrt())
            .unwrap_or(0.0)
    }

    pub(crate) fn with_values(&self, values: Array2<Complex64>) -> Self {
        Self {
            angles: self.angles.clone(),
            values,
            params: self.params,
        }
    }
}

/// Switches for the marching scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchOptions {
    /// When false the transverse diffraction term is dropped and the march
    /// reduces to trapezoidal integration of the source along `x`.
    pub diffraction: bool,
}

impl Default for MarchOptions {
    fn default() -> Self {
        Self { diffraction: true }
    }
}

/// Pre-factored Crank-Nicolson stepper for one grid and wavenumber.
#[derive(Debug, Clone)]
pub struct Marcher {
    grid: Grid2D,
    /// `I - dx/2 A` on interior nodes.
    explicit: TridiagonalSystem,
    /// Factor of `I + dx/2 A`.
    implicit_lu: TridiagonalFactor,
    /// Factor of `(I + dx/2 A)^H = I - dx/2 A`.
    implicit_adj_lu: TridiagonalFactor,
}

impl Marcher {
    pub fn new(grid: Grid2D, params: &WaveParams, options: MarchOptions) -> Result<Self> {
        params.check_grid(&grid)?;
        if grid.n_y() < 3 {
            return Err(Error::InvalidInput(
                "marching needs at least one interior transverse node".into(),
            ));
        }
        let m = grid.n_y() - 2;
        let dx = grid.dx();
        let dy = grid.dy();
        // dx/2 * 1/(4ik) / dy^2
        let r = if options.diffraction {
            Complex64::new(0.0, -1.0) * (dx / (8.0 * params.wavenumber() * dy * dy))
        } else {
            Complex64::new(0.0, 0.0)
        };
        let one = Complex64::new(1.0, 0.0);
        let implicit =
            TridiagonalSystem::new(vec![r; m - 1], vec![one - 2.0 * r; m], vec![r; m - 1])?;
        let explicit =
            TridiagonalSystem::new(vec![-r; m - 1], vec![one + 2.0 * r; m], vec![-r; m - 1])?;
        let implicit_lu = implicit.factor()?;
        let implicit_adj_lu = implicit.conj_transpose().factor()?;
        Ok(Self {
            grid,
            explicit,
            implicit_lu,
            implicit_adj_lu,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    fn interior(&self) -> usize {
        self.grid.n_y() - 2
    }

    /// One step: `v <- B^{-1} (C v + dx * s_half)` on interior values.
    fn step(&self, v: &mut Vec<Complex64>, half_source: Option<(&[Complex64], &[Complex64])>) {
        let dx = self.grid.dx();
        let mut rhs = self.explicit.apply(v);
        if let Some((a, b)) = half_source {
            for ((r, sa), sb) in rhs.iter_mut().zip(a).zip(b) {
                *r += (sa + sb) * (0.5 * dx);
            }
        }
        self.implicit_lu.solve_in_place(&mut rhs);
        *v = rhs;
    }

    fn interior_row<'a>(source: &'a ArrayView2<'_, Complex64>, i: usize) -> &'a [Complex64] {
        let row = source.row(i).to_slice().expect("standard layout");
        &row[1..row.len() - 1]
    }

    fn check_source(&self, source: &ArrayView2<Complex64>) -> Result<()> {
        if source.dim() != self.grid.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.grid.shape()),
                got: format!("{:?}", source.dim()),
            });
        }
        Ok(())
    }

    /// Full envelope field for a (complex) source.
    pub fn march(&self, source: ArrayView2<Complex64>) -> Result<Array2<Complex64>> {
        self.check_source(&source)?;
        let source = source.as_standard_layout();
        let source = source.view();
        let (n_x, n_y) = self.grid.shape();
        let mut out = Array2::zeros((n_x, n_y));
        let mut v = vec![Complex64::new(0.0, 0.0); self.interior()];
        for i in 0..n_x - 1 {
            self.step(
                &mut v,
                Some((
                    Self::interior_row(&source, i),
                    Self::interior_row(&source, i + 1),
                )),
            );
            out.row_mut(i + 1).as_slice_mut().expect("standard layout")[1..n_y - 1]
                .copy_from_slice(&v);
        }
        Ok(out)
    }

    /// Last slice `v(L/2, .)` only, padded with the Dirichlet zeros.
    pub fn final_slice(&self, source: ArrayView2<Complex64>) -> Result<Vec<Complex64>> {
        self.check_source(&source)?;
        let source = source.as_standard_layout();
        let source = source.view();
        let n_x = self.grid.n_x();
        let mut v = vec![Complex64::new(0.0, 0.0); self.interior()];
        for i in 0..n_x - 1 {
            self.step(
                &mut v,
                Some((
                    Self::interior_row(&source, i),
                    Self::interior_row(&source, i + 1),
                )),
            );
        }
        Ok(pad(v))
    }

    /// Source-free march of an initial slice (length `n_y`, boundary entries
    /// ignored) for `steps` steps; returns every slice including the first.
    pub fn propagate_free(
        &self,
        initial: &[Complex64],
        steps: usize,
    ) -> Result<Vec<Vec<Complex64>>> {
        if initial.len() != self.grid.n_y() {
            return Err(Error::ShapeMismatch {
                expected: self.grid.n_y().to_string(),
                got: initial.len().to_string(),
            });
        }
        let mut v = initial[1..initial.len() - 1].to_vec();
        let mut slices = Vec::with_capacity(steps + 1);
        slices.push(pad(v.clone()));
        for _ in 0..steps {
            self.step(&mut v, None);
            slices.push(pad(v.clone()));
        }
        Ok(slices)
    }

    /// Conjugate transpose of [`final_slice`](Self::final_slice): maps a
    /// terminal slice `eta` to the source sensitivity field `E^H eta`.
    ///
    /// Runs the adjoint recurrence backwards from `x = L/2`:
    /// `w = B^{-H} mu_{j+1}`, `mu_j = C^H w`, and deposits `dx/2 * w` on
    /// source columns `j` and `j+1`.
    pub fn final_slice_adjoint(&self, eta: &[Complex64]) -> Result<Array2<Complex64>> {
        let (n_x, n_y) = self.grid.shape();
        if eta.len() != n_y {
            return Err(Error::ShapeMismatch {
                expected: n_y.to_string(),
                got: eta.len().to_string(),
            });
        }
        let half_dx = 0.5 * self.grid.dx();
        let explicit_adj = self.explicit.conj_transpose();
        let mut out = Array2::zeros((n_x, n_y));
        let mut mu = eta[1..n_y - 1].to_vec();
        for i in (0..n_x - 1).rev() {
            let mut w = mu;
            self.implicit_adj_lu.solve_in_place(&mut w);
            for (j, wj) in w.iter().enumerate() {
                out[[i, j + 1]] += wj * half_dx;
                out[[i + 1, j + 1]] += wj * half_dx;
            }
            mu = explicit_adj.apply(&w);
        }
        Ok(out)
    }
}

fn pad(interior: Vec<Complex64>) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(interior.len() + 2);
    out.push(Complex64::new(0.0, 0.0));
    out.extend(interior);
    out.push(Complex64::new(0.0, 0.0));
    out
}

/// Envelope field `v(x, y)` driven by an (unrotated) real source.
pub fn march_envelope(beta: &RealField, params: &WaveParams) -> Result<ComplexField> {
    march_envelope_with(beta, params, MarchOptions::default())
}

pub fn march_envelope_with(
    beta: &RealField,
    params: &WaveParams,
    options: MarchOptions,
) -> Result<ComplexField> {
    let marcher = Marcher::new(*beta.grid(), params, options)?;
    let src = beta.values().mapv(|v| Complex64::new(v, 0.0));
    ComplexField::new(*beta.grid(), marcher.march(src.view())?)
}

fn validate_angles(angles: &[f64]) -> Result<()> {
    // Sinogram::new performs the full check; fail early with the same message.
    if angles.is_empty() {
        return Err(Error::InvalidInput("no projection angles".into()));
    }
    Ok(())
}

/// Finite-frequency transmission sinogram of a real phantom.
pub fn forward_map(beta: &RealField, angles: &[f64], params: &WaveParams) -> Result<Sinogram> {
    forward_map_with(&beta.to_complex(), angles, params, MarchOptions::default())
}

/// Forward map extended complex-linearly to complex sources.
pub fn forward_map_complex(
    beta: &ComplexField,
    angles: &[f64],
    params: &WaveParams,
) -> Result<Sinogram> {
    forward_map_with(beta, angles, params, MarchOptions::default())
}

pub fn forward_map_with(
    beta: &ComplexField,
    angles: &[f64],
    params: &WaveParams,
    options: MarchOptions,
) -> Result<Sinogram> {
    validate_angles(angles)?;
    let grid = *beta.grid();
    let marcher = Marcher::new(grid, params, options)?;
    let rows: Vec<Vec<Complex64>> = angles
        .par_iter()
        .map(|&theta| {
            let op = RotationOperator::new(theta, grid);
            let rotated = rotate_complex(&op, beta.values());
            marcher.final_slice(rotated.view())
        })
        .collect::<Result<_>>()?;
    let n_y = grid.n_y();
    let mut values = Array2::zeros((angles.len(), n_y));
    for (a, row) in rows.into_iter().enumerate() {
        values
            .row_mut(a)
            .as_slice_mut()
            .unwrap()
            .copy_from_slice(&row);
    }
    Sinogram::new(angles.to_vec(), values, *params)
}

/// Fraction of `sum |beta|` lying within `cells` nodes of the lateral
/// (`y = +-L/2`) boundaries.
pub fn lateral_margin_fraction(beta: &RealField, cells: usize) -> f64 {
    let n_y = beta.grid().n_y();
    let total: f64 = beta.values().iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let edge: f64 = beta
        .values()
        .indexed_iter()
        .filter(|((_, j), _)| *j < cells || *j + cells >= n_y)
        .map(|(_, v)| v.abs())
        .sum();
    edge / total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> WaveParams {
        WaveParams::new(2.0, 20.0).unwrap()
    }

    #[test]
    fn wavenumber_definition() {
        let p = WaveParams::new(2.0, 100.0).unwrap();
        assert!((p.wavenumber() - 2.0 * PI * 50.0).abs() < 1e-12);
        assert!((p.wavelength() - 0.02).abs() < 1e-15);
        assert!(WaveParams::new(1.0, 0.0).is_err());
        assert!(WaveParams::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn zero_source_gives_zero_field() {
        let grid = Grid2D::square(17, 2.0).unwrap();
        let v = march_envelope(&RealField::zeros(grid), &params()).unwrap();
        assert!(v.values().iter().all(|c| *c == Complex64::new(0.0, 0.0)));
        let s = forward_map(&RealField::zeros(grid), &uniform_angles(4), &params()).unwrap();
        assert!(s.values().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn boundary_values_stay_zero() {
        let grid = Grid2D::square(21, 2.0).unwrap();
        let beta = RealField::from_fn(grid, |x, y| (-(x * x + y * y) * 4.0).exp()).unwrap();
        let v = march_envelope(&beta, &params()).unwrap();
        let vals = v.values();
        for i in 0..21 {
            assert_eq!(vals[[i, 0]], Complex64::new(0.0, 0.0));
            assert_eq!(vals[[i, 20]], Complex64::new(0.0, 0.0));
            assert_eq!(vals[[0, i]], Complex64::new(0.0, 0.0));
        }
        assert!(vals[[20, 10]].norm() > 0.0);
    }

    #[test]
    fn grid_length_mismatch() {
        let grid = Grid2D::square(9, 1.0).unwrap();
        assert!(matches!(
            march_envelope(&RealField::zeros(grid), &params()),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn sinogram_validation() {
        let p = params();
        assert!(Sinogram::zeros(vec![], 8, p).is_err());
        assert!(Sinogram::zeros(vec![0.2, 0.1], 8, p).is_err());
        assert!(Sinogram::zeros(vec![0.0, 2.0 * PI], 8, p).is_err());
        assert!(Sinogram::zeros(vec![0.0, 1.0], 8, p).is_ok());
    }

    #[test]
    fn margin_fraction() {
        let grid = Grid2D::square(20, 2.0).unwrap();
        let mut v = Array2::zeros((20, 20));
        v[[10, 1]] = 1.0;
        v[[10, 10]] = 3.0;
        let f = RealField::new(grid, v).unwrap();
        assert!((lateral_margin_fraction(&f, 5) - 0.25).abs() < 1e-15);
    }
}
