//! Nonlinearity phantoms and the rotation operator `beta -> beta o R_theta`.
//!
//! Rotation is realised as an explicit sparse gather matrix with bilinear
//! weights, so that its exact transpose (a scatter) is available to the
//! back-projector.

use std::ops::{Add, AddAssign, Mul};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{bilinear, Grid2D, RealField};
use crate::io::{self, PgmImage};

/// Nodes within this many cells of any edge are forced to zero.
pub const BOUNDARY_MARGIN: usize = 2;

/// A nonlinearity map with a label.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub field: RealField,
    pub name: String,
}

impl Phantom {
    pub fn new(field: RealField, name: impl Into<String>) -> Self {
        Self {
            field,
            name: name.into(),
        }
    }
}

/// One ellipse of an additive ellipse phantom, in unit-square coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    pub semi_a: f64,
    pub semi_b: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub tilt_deg: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.tilt_deg.to_radians().sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let u = (dx * c + dy * s) / self.semi_a;
        let v = (-dx * s + dy * c) / self.semi_b;
        u * u + v * v <= 1.0
    }
}

const fn ellipse(intensity: f64, a: f64, b: f64, x: f64, y: f64, tilt: f64) -> Ellipse {
    Ellipse {
        intensity,
        semi_a: a,
        semi_b: b,
        center_x: x,
        center_y: y,
        tilt_deg: tilt,
    }
}

/// Ten-ellipse Shepp-Logan table with the higher-contrast intensities of Toft
/// (the "modified" variant). Columns: intensity, semi-axes a, b, centre
/// (x, y) on `[-1, 1]^2`, tilt in degrees.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    ellipse(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    ellipse(-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    ellipse(-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    ellipse(-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    ellipse(0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    ellipse(0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    ellipse(0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    ellipse(0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    ellipse(0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    ellipse(0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

/// Unscaled Shepp-Logan intensity at a point of the unit square.
pub fn shepp_logan_value(x: f64, y: f64) -> f64 {
    SHEPP_LOGAN
        .iter()
        .filter(|e| e.contains(x, y))
        .map(|e| e.intensity)
        .sum()
}

fn zero_margin(values: &mut Array2<f64>) {
    let (n_x, n_y) = values.dim();
    for ((i, j), v) in values.indexed_iter_mut() {
        if i < BOUNDARY_MARGIN
            || j < BOUNDARY_MARGIN
            || i + BOUNDARY_MARGIN >= n_x
            || j + BOUNDARY_MARGIN >= n_y
        {
            *v = 0.0;
        }
    }
}

/// Shepp-Logan phantom scaled into `[0, 1]`.
///
/// Phantom axes map onto the grid so that a PGM rendering (row = `x` index)
/// shows the usual orientation: image "up" is `-x`, image "right" is `+y`.
pub fn shepp_logan(grid: Grid2D) -> Phantom {
    let half = 0.5 * grid.length();
    let mut values = Array2::from_shape_fn(grid.shape(), |(i, j)| {
        shepp_logan_value(grid.y(j) / half, -grid.x(i) / half).max(0.0)
    });
    zero_margin(&mut values);
    let max = values.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        values.mapv_inplace(|v| v / max);
    }
    Phantom::new(
        RealField::new(grid, values).expect("finite by construction"),
        "shepp-logan",
    )
}

/// Centred disk of the given radius and amplitude with a linear edge ramp of
/// `edge_width` (0 gives a sharp indicator). The ramp is centred on the
/// radius so chord integrals match the sharp disk to second order.
pub fn disk(grid: Grid2D, radius: f64, amplitude: f64, edge_width: f64) -> Phantom {
    let mut values = Array2::from_shape_fn(grid.shape(), |(i, j)| {
        let r = grid.x(i).hypot(grid.y(j));
        let t = if edge_width > 0.0 {
            ((radius - r) / edge_width + 0.5).clamp(0.0, 1.0)
        } else if r <= radius {
            1.0
        } else {
            0.0
        };
        amplitude * t
    });
    zero_margin(&mut values);
    Phantom::new(RealField::new(grid, values).expect("finite"), "disk")
}

/// Isotropic Gaussian bump centred at `(cx, cy)` with peak 1.
pub fn gaussian_bump(grid: Grid2D, cx: f64, cy: f64, sigma: f64) -> Phantom {
    let mut values = Array2::from_shape_fn(grid.shape(), |(i, j)| {
        let dx = grid.x(i) - cx;
        let dy = grid.y(j) - cy;
        (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
    });
    zero_margin(&mut values);
    Phantom::new(RealField::new(grid, values).expect("finite"), "gaussian")
}

/// Loads a PGM (P5) or real RF64 raster, resamples it bilinearly onto `grid`,
/// rescales to `[0, 1]` and zeroes the boundary margin.
///
/// PGM grey levels are divided by `maxval`; RF64 values are min-max rescaled
/// (a constant field maps to 1 if positive, else 0).
pub fn load_raster(path: impl AsRef<Path>, grid: Grid2D) -> Result<Phantom> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "raster".into());
    let source = if bytes.starts_with(b"P5") {
        pgm_to_unit(&io::read_pgm_bytes(&bytes)?)
    } else if bytes.starts_with(b"RF64") {
        let f = io::decode_rf64(&bytes)?.into_real()?;
        rescale_unit(f.into_values())
    } else if bytes.starts_with(b"P") {
        return Err(Error::UnsupportedFormat(
            "only binary greymaps (P5) are supported".into(),
        ));
    } else {
        return Err(Error::UnsupportedFormat(format!(
            "{} is neither PGM (P5) nor RF64",
            path.display()
        )));
    };
    let mut values = resample(&source, grid);
    zero_margin(&mut values);
    Ok(Phantom::new(RealField::new(grid, values)?, name))
}

fn pgm_to_unit(img: &PgmImage) -> Array2<f64> {
    let scale = 1.0 / img.maxval as f64;
    Array2::from_shape_fn((img.height, img.width), |(r, c)| {
        img.data[r * img.width + c] as f64 * scale
    })
}

fn rescale_unit(mut values: Array2<f64>) -> Array2<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi > lo {
        values.mapv_inplace(|v| (v - lo) / (hi - lo));
    } else {
        let c = if hi > 0.0 { 1.0 } else { 0.0 };
        values.fill(c);
    }
    values
}

/// Bilinear resampling of a raster spanning the whole domain onto `grid`.
fn resample(source: &Array2<f64>, grid: Grid2D) -> Array2<f64> {
    let (rows, cols) = source.dim();
    if (rows, cols) == grid.shape() {
        return source.clone();
    }
    let ratio = |src: usize, dst: usize| {
        if dst > 1 {
            (src - 1) as f64 / (dst - 1) as f64
        } else {
            0.0
        }
    };
    let (si, sj) = (ratio(rows, grid.n_x()), ratio(cols, grid.n_y()));
    Array2::from_shape_fn(grid.shape(), |(i, j)| {
        let fi = (i as f64 * si).min((rows - 1) as f64);
        let fj = (j as f64 * sj).min((cols - 1) as f64);
        if rows < 2 || cols < 2 {
            // degenerate raster: nearest sample
            source[[fi.round() as usize, fj.round() as usize]]
        } else {
            bilinear(source, fi, fj)
        }
    })
}

/// Quantises a `[0, 1]` field to a 16-bit PGM (values clamped).
pub fn to_pgm16(field: &RealField) -> PgmImage {
    let (n_x, n_y) = field.grid().shape();
    PgmImage {
        width: n_y,
        height: n_x,
        maxval: 65535,
        data: field
            .values()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
            .collect(),
    }
}

/// Bilinear gather stencil for one target node.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Stencil {
    i0: u32,
    j0: u32,
    /// Weights for (i0,j0), (i0+1,j0), (i0,j0+1), (i0+1,j0+1).
    w: [f64; 4],
}

const SNAP: f64 = 1e-10;

fn snap_unit(t: f64) -> f64 {
    if t.abs() < SNAP {
        0.0
    } else if (1.0 - t).abs() < SNAP {
        1.0
    } else {
        t
    }
}

/// Splits a fractional index into a base cell and an offset, or `None` when
/// it falls outside `[0, n-1]` (with a tiny tolerance for round-off).
fn locate(f: f64, n: usize) -> Option<(usize, f64)> {
    let max = (n - 1) as f64;
    if !(f > -SNAP && f < max + SNAP) {
        return None;
    }
    let f = f.clamp(0.0, max);
    let i0 = (f.floor() as usize).min(n - 2);
    Some((i0, snap_unit(f - i0 as f64)))
}

/// Sparse matrix of `f -> f o R_theta` on a grid, with
/// `R_theta = [[cos, -sin], [sin, cos]]`.
#[derive(Debug, Clone)]
pub struct RotationOperator {
    theta: f64,
    grid: Grid2D,
    rows: Vec<Option<Stencil>>,
}

impl RotationOperator {
    pub fn new(theta: f64, grid: Grid2D) -> Self {
        let (s, c) = theta.sin_cos();
        let (s, c) = if theta == 0.0 { (0.0, 1.0) } else { (s, c) };
        let (n_x, n_y) = grid.shape();
        let mut rows = Vec::with_capacity(grid.len());
        for i in 0..n_x {
            let x = grid.x(i);
            for j in 0..n_y {
                let y = grid.y(j);
                let (fi, fj) = grid.to_index(c * x - s * y, s * x + c * y);
                let stencil = match (locate(fi, n_x), locate(fj, n_y)) {
                    (Some((i0, ti)), Some((j0, tj))) => Some(Stencil {
                        i0: i0 as u32,
                        j0: j0 as u32,
                        w: [
                            (1.0 - ti) * (1.0 - tj),
                            ti * (1.0 - tj),
                            (1.0 - ti) * tj,
                            ti * tj,
                        ],
                    }),
                    _ => None,
                };
                rows.push(stencil);
            }
        }
        Self { theta, grid, rows }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Gather `out = M f`.
    pub fn apply<T>(&self, f: &Array2<T>) -> Array2<T>
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        let n_y = self.grid.n_y();
        let mut out = Array2::from_elem(self.grid.shape(), T::default());
        for (k, (dst, row)) in out.iter_mut().zip(&self.rows).enumerate() {
            if let Some(st) = row {
                let (i0, j0) = (st.i0 as usize, st.j0 as usize);
                debug_assert!(k / n_y < self.grid.n_x());
                *dst = f[[i0, j0]] * st.w[0]
                    + f[[i0 + 1, j0]] * st.w[1]
                    + f[[i0, j0 + 1]] * st.w[2]
                    + f[[i0 + 1, j0 + 1]] * st.w[3];
            }
        }
        out
    }

    /// Scatter `out = M^T g`, the exact transpose of [`apply`](Self::apply).
    pub fn apply_transpose<T>(&self, g: &Array2<T>) -> Array2<T>
    where
        T: Copy + Default + AddAssign + Mul<f64, Output = T>,
    {
        let mut out = Array2::from_elem(self.grid.shape(), T::default());
        for (src, row) in g.iter().zip(&self.rows) {
            if let Some(st) = row {
                let (i0, j0) = (st.i0 as usize, st.j0 as usize);
                let v = *src;
                out[[i0, j0]] += v * st.w[0];
                out[[i0 + 1, j0]] += v * st.w[1];
                out[[i0, j0 + 1]] += v * st.w[2];
                out[[i0 + 1, j0 + 1]] += v * st.w[3];
            }
        }
        out
    }

    /// Sum of gather weights for each target node (1 inside, 0 outside).
    pub fn row_sums(&self) -> Array2<f64> {
        let sums: Vec<f64> = self
            .rows
            .iter()
            .map(|r| r.map_or(0.0, |s| s.w.iter().sum()))
            .collect();
        Array2::from_shape_vec(self.grid.shape(), sums).expect("one row per node")
    }
}

pub fn rotate(op: &RotationOperator, f: &RealField) -> Result<RealField> {
    op.grid().ensure_same(f.grid())?;
    RealField::new(*op.grid(), op.apply(f.values()))
}

pub fn rotate_transpose(op: &RotationOperator, g: &RealField) -> Result<RealField> {
    op.grid().ensure_same(g.grid())?;
    RealField::new(*op.grid(), op.apply_transpose(g.values()))
}

pub(crate) fn rotate_complex(op: &RotationOperator, f: &Array2<Complex64>) -> Array2<Complex64> {
    op.apply(f)
}
