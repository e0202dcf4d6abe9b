//! Gaussian-beam kernels along a geodesic: the Riccati equation
//! `H' + HCH + D = 0` solved through its linearization `Y' = CZ`,
//! `Z' = -DY`, `H = Z Y^-1`, the conserved quantity
//! `det(Im H) |det Y|^2`, and the Jacobi-weighted and plain ray transforms.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::RealField;
use crate::io::read_rf64;

type CMat3 = Matrix3<Complex64>;

/// Transverse spreading matrix `C = diag(0, 2, 2)`.
pub fn spreading_matrix() -> Matrix3<f64> {
    Matrix3::from_diagonal(&nalgebra::Vector3::new(0.0, 2.0, 2.0))
}

const DET_FLOOR: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;
const FACTOR_TOL: f64 = 1e-8;

/// Number of columns in a tabulated curvature file: `tau` plus the six
/// upper-triangle entries `D11 D12 D13 D22 D23 D33`.
pub const CURVATURE_TABLE_COLUMNS: usize = 7;

/// Curvature input `tau -> D(tau)` (real symmetric 3x3) on `[tau_min, tau_max]`.
#[derive(Clone)]
pub struct CurvatureProfile {
    d: Arc<dyn Fn(f64) -> Matrix3<f64> + Send + Sync>,
    tau_min: f64,
    tau_max: f64,
    label: String,
}

impl fmt::Debug for CurvatureProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CurvatureProfile")
            .field("label", &self.label)
            .field("tau_min", &self.tau_min)
            .field("tau_max", &self.tau_max)
            .finish()
    }
}

fn check_interval(tau_min: f64, tau_max: f64) -> Result<()> {
    if !(tau_min.is_finite() && tau_max.is_finite() && tau_max > tau_min) {
        return Err(Error::InvalidInput(format!(
            "curvature interval [{tau_min}, {tau_max}] is empty or not finite"
        )));
    }
    Ok(())
}

impl CurvatureProfile {
    pub fn flat(tau_min: f64, tau_max: f64) -> Result<Self> {
        Self::from_fn("flat", tau_min, tau_max, |_| Matrix3::zeros())
    }

    /// `D = kappa * diag(0, 1, 1)`.
    pub fn constant(kappa: f64, tau_min: f64, tau_max: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::NonFinite("curvature"));
        }
        let d = Matrix3::from_diagonal(&nalgebra::Vector3::new(0.0, kappa, kappa));
        Self::from_fn(format!("constant:{kappa}"), tau_min, tau_max, move |_| d)
    }

    /// Any user-supplied symmetric matrix function.
    pub fn from_fn(
        label: impl Into<String>,
        tau_min: f64,
        tau_max: f64,
        d: impl Fn(f64) -> Matrix3<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        check_interval(tau_min, tau_max)?;
        Ok(Self {
            d: Arc::new(d),
            tau_min,
            tau_max,
            label: label.into(),
        })
    }

    /// Piecewise-linear interpolation of samples `(tau_k, D_k)`; taus must
    /// increase strictly and every `D_k` must be symmetric.
    pub fn from_table(taus: Vec<f64>, mats: Vec<Matrix3<f64>>) -> Result<Self> {
        if taus.len() < 2 || taus.len() != mats.len() {
            return Err(Error::InvalidInput(
                "curvature table needs at least two samples".into(),
            ));
        }
        if taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "curvature table taus must increase strictly".into(),
            ));
        }
        for m in &mats {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("curvature table"));
            }
            if (m - m.transpose()).norm() > 1e-12 * m.norm().max(1.0) {
                return Err(Error::InvalidInput(
                    "curvature table entry not symmetric".into(),
                ));
            }
        }
        let (lo, hi) = (taus[0], taus[taus.len() - 1]);
        let n = taus.len();
        Self::from_fn("table", lo, hi, move |tau| {
            let k = taus.partition_point(|t| *t <= tau).clamp(1, n - 1);
            let (t0, t1) = (taus[k - 1], taus[k]);
            let w = ((tau - t0) / (t1 - t0)).clamp(0.0, 1.0);
            mats[k - 1] * (1.0 - w) + mats[k] * w
        })
    }

    /// Reads a real RF64 table with one row per sample and columns
    /// `tau D11 D12 D13 D22 D23 D33`.
    pub fn read_table(path: impl AsRef<Path>) -> Result<Self> {
        let field = read_rf64(path)?.into_real()?;
        let v = field.values();
        if v.ncols() != CURVATURE_TABLE_COLUMNS {
            return Err(Error::ShapeMismatch {
                expected: format!("{CURVATURE_TABLE_COLUMNS} columns"),
                got: format!("{} columns", v.ncols()),
            });
        }
        let mut taus = Vec::with_capacity(v.nrows());
        let mut mats = Vec::with_capacity(v.nrows());
        for row in v.rows() {
            taus.push(row[0]);
            let (a, b, c, d, e, f) = (row[1], row[2], row[3], row[4], row[5], row[6]);
            mats.push(Matrix3::new(a, b, c, b, d, e, c, e, f));
        }
        Self::from_table(taus, mats)
    }

    /// Parses `flat`, `constant:<kappa>` or `table:<path>` on the given interval
    /// (a table supplies its own interval).
    pub fn parse(spec: &str, tau_min: f64, tau_max: f64) -> Result<Self> {
        let bad = || Error::ValueOutOfRange {
            key: "riccati.profile".into(),
            reason: format!("`{spec}` is not flat, constant:<kappa> or table:<path>"),
        };
        match spec.split_once(':') {
            None if spec == "flat" => Self::flat(tau_min, tau_max),
            Some(("constant", k)) => {
                Self::constant(k.trim().parse().map_err(|_| bad())?, tau_min, tau_max)
            }
            Some(("table", p)) if !p.is_empty() => Self::read_table(p),
            _ => Err(bad()),
        }
    }

    pub fn eval(&self, tau: f64) -> Matrix3<f64> {
        (self.d)(tau)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.tau_min, self.tau_max)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// One sample of a Riccati trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiState {
    pub tau: f64,
    pub h: CMat3,
    pub y: CMat3,
    pub z: CMat3,
}

fn to_complex(m: &Matrix3<f64>) -> CMat3 {
    m.map(|v| Complex64::new(v, 0.0))
}

fn im_part(m: &CMat3) -> Matrix3<f64> {
    m.map(|v| v.im)
}

fn min_eigenvalue(m: &Matrix3<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

fn cnorm(m: &CMat3) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

impl RiccatiState {
    fn build(tau: f64, y: CMat3, z: CMat3) -> Result<Self> {
        let det = y.determinant();
        if !(det.norm() >= DET_FLOOR) {
            return Err(Error::ConjugatePoint {
                tau,
                det: det.norm(),
            });
        }
        let y_inv = y.try_inverse().ok_or(Error::ConjugatePoint {
            tau,
            det: det.norm(),
        })?;
        let h = z * y_inv;
        let state = Self { tau, h, y, z };
        state.check()?;
        Ok(state)
    }

    /// Checks symmetry, positivity of `Im H` and the factorization `H Y = Z`.
    pub fn check(&self) -> Result<()> {
        let violated = |what: String| Error::InvariantViolated {
            tau: self.tau,
            what,
        };
        let h_norm = cnorm(&self.h);
        if !h_norm.is_finite() {
            return Err(violated("H not finite".into()));
        }
        let asym = cnorm(&(self.h - self.h.transpose()));
        if asym > SYMMETRY_TOL * h_norm {
            return Err(violated(format!("asymmetry {:.3e}", asym / h_norm)));
        }
        let lam = min_eigenvalue(&im_part(&self.h));
        if !(lam > 0.0) {
            return Err(violated(format!(
                "Im H not positive definite (min eig {lam:.3e})"
            )));
        }
        let resid = cnorm(&(self.h * self.y - self.z));
        if resid > FACTOR_TOL * cnorm(&self.z).max(f64::MIN_POSITIVE) {
            return Err(violated(format!("H Y != Z (residual {resid:.3e})")));
        }
        Ok(())
    }

    pub fn conserved(&self) -> f64 {
        im_part(&self.h).determinant() * self.y.determinant().norm_sqr()
    }
}

fn uniform_steps(len: f64, step: f64) -> usize {
    ((len / step) - 1e-9).ceil().max(1.0) as usize
}

/// Integrates `Y' = CZ`, `Z' = -D Y` from `Y(tau_min) = Y0`, `Z(tau_min) = Y1`
/// with classical RK4 and uniform step at most `step`.
pub fn solve_yz(
    profile: &CurvatureProfile,
    y0: CMat3,
    y1: CMat3,
    step: f64,
) -> Result<Vec<RiccatiState>> {
    let (t0, t1) = profile.interval();
    if !(step > 0.0 && step <= (t1 - t0) / 10.0) {
        return Err(Error::InvalidInput(format!(
            "step {step} must lie in (0, {}]",
            (t1 - t0) / 10.0
        )));
    }
    if y0
        .iter()
        .chain(y1.iter())
        .any(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Err(Error::NonFinite("initial Y/Z data"));
    }
    let y0_inv = y0.try_inverse().ok_or(Error::ConjugatePoint {
        tau: t0,
        det: y0.determinant().norm(),
    })?;
    let h0 = y1 * y0_inv;
    let lam = min_eigenvalue(&im_part(&h0));
    if !(lam > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Im(Y1 Y0^-1) must be positive definite (min eigenvalue {lam:.3e})"
        )));
    }

    let n = uniform_steps(t1 - t0, step);
    let h = (t1 - t0) / n as f64;
    let c = to_complex(&spreading_matrix());
    let rhs = |tau: f64, y: &CMat3, z: &CMat3| -> (CMat3, CMat3) {
        let d = to_complex(&profile.eval(tau));
        (c * z, -(d * y))
    };

    let mut out = Vec::with_capacity(n + 1);
    let (mut y, mut z) = (y0, y1);
    out.push(RiccatiState::build(t0, y, z)?);
    for k in 0..n {
        let tau = t0 + k as f64 * h;
        let hc = Complex64::new(h, 0.0);
        let half = Complex64::new(0.5 * h, 0.0);
        let (ky1, kz1) = rhs(tau, &y, &z);
        let (ky2, kz2) = rhs(tau + 0.5 * h, &(y + ky1 * half), &(z + kz1 * half));
        let (ky3, kz3) = rhs(tau + 0.5 * h, &(y + ky2 * half), &(z + kz2 * half));
        let (ky4, kz4) = rhs(tau + h, &(y + ky3 * hc), &(z + kz3 * hc));
        let sixth = Complex64::new(h / 6.0, 0.0);
        let two = Complex64::new(2.0, 0.0);
        y += (ky1 + ky2 * two + ky3 * two + ky4) * sixth;
        z += (kz1 + kz2 * two + kz3 * two + kz4) * sixth;
        let t_next = if k + 1 == n {
            t1
        } else {
            t0 + (k + 1) as f64 * h
        };
        out.push(RiccatiState::build(t_next, y, z)?);
    }
    Ok(out)
}

/// `det(Im H) |det Y|^2` at every sample.
pub fn conserved_c0(states: &[RiccatiState]) -> Vec<f64> {
    states.iter().map(RiccatiState::conserved).collect()
}

/// Largest `|c - mean| / |mean|` over a sequence.
pub fn relative_drift(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) / mean.abs()
}

/// Transverse Jacobi matrix `t -> Ytilde(t)` (real 2x2).
#[derive(Clone)]
pub enum TransversalJacobi {
    Constant(Matrix2<f64>),
    /// Samples of `Ytilde` and its derivative on increasing `t`, cubic Hermite
    /// interpolated.
    Sampled {
        t: Vec<f64>,
        y: Vec<Matrix2<f64>>,
        dy: Vec<Matrix2<f64>>,
    },
    Function(Arc<dyn Fn(f64) -> Matrix2<f64> + Send + Sync>),
}

impl fmt::Debug for TransversalJacobi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransversalJacobi::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            TransversalJacobi::Sampled { t, .. } => f
                .debug_struct("Sampled")
                .field("samples", &t.len())
                .finish_non_exhaustive(),
            TransversalJacobi::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl TransversalJacobi {
    pub fn identity() -> Self {
        TransversalJacobi::Constant(Matrix2::identity())
    }

    pub fn eval(&self, t: f64) -> Matrix2<f64> {
        match self {
            TransversalJacobi::Constant(m) => *m,
            TransversalJacobi::Function(f) => f(t),
            TransversalJacobi::Sampled { t: ts, y, dy } => {
                let n = ts.len();
                if n == 1 {
                    return y[0];
                }
                let k = ts.partition_point(|s| *s <= t).clamp(1, n - 1);
                let (t0, t1) = (ts[k - 1], ts[k]);
                let h = t1 - t0;
                let s = ((t - t0) / h).clamp(0.0, 1.0);
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                y[k - 1] * h00 + dy[k - 1] * (h10 * h) + y[k] * h01 + dy[k] * (h11 * h)
            }
        }
    }

    pub fn det(&self, t: f64) -> f64 {
        self.eval(t).determinant()
    }
}

/// Real transverse block of the Y/Z system, `Y' = 2Z`, `Z' = -D_perp Y`,
/// with `D_perp` the lower-right 2x2 block of the curvature. Unlike
/// [`solve_yz`] this accepts real initial data such as `Y0 = I`, `Y1 = 0`.
pub fn transverse_jacobi(
    profile: &CurvatureProfile,
    y0: Matrix2<f64>,
    y1: Matrix2<f64>,
    step: f64,
) -> Result<TransversalJacobi> {
    let (t0, t1) = profile.interval();
    if !(step > 0.0 && step <= (t1 - t0) / 10.0) {
        return Err(Error::InvalidInput(format!(
            "step {step} must lie in (0, {}]",
            (t1 - t0) / 10.0
        )));
    }
    let n = uniform_steps(t1 - t0, step);
    let h = (t1 - t0) / n as f64;
    let d_perp = |tau: f64| profile.eval(tau).fixed_view::<2, 2>(1, 1).into_owned();
    let rhs = |tau: f64, y: &Matrix2<f64>, z: &Matrix2<f64>| (z * 2.0, -(d_perp(tau) * y));

    let mut ts = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    let mut dys = Vec::with_capacity(n + 1);
    let (mut y, mut z) = (y0, y1);
    ts.push(t0);
    ys.push(y);
    dys.push(z * 2.0);
    for k in 0..n {
        let tau = t0 + k as f64 * h;
        let (a1, b1) = rhs(tau, &y, &z);
        let (a2, b2) = rhs(tau + 0.5 * h, &(y + a1 * (0.5 * h)), &(z + b1 * (0.5 * h)));
        let (a3, b3) = rhs(tau + 0.5 * h, &(y + a2 * (0.5 * h)), &(z + b2 * (0.5 * h)));
        let (a4, b4) = rhs(tau + h, &(y + a3 * h), &(z + b3 * h));
        y += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
        z += (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (h / 6.0);
        ts.push(if k + 1 == n {
            t1
        } else {
            t0 + (k + 1) as f64 * h
        });
        ys.push(y);
        dys.push(z * 2.0);
    }
    Ok(TransversalJacobi::Sampled {
        t: ts,
        y: ys,
        dy: dys,
    })
}

/// Default number of Simpson panels for [`jacobi_ray_transform`].
pub const DEFAULT_SIMPSON_PANELS: usize = 2048;

/// `int_a^b f(t) (det Ytilde(t))^(-1/2) dt` by composite Simpson.
pub fn jacobi_ray_transform(
    f: impl Fn(f64) -> f64,
    ytilde: &TransversalJacobi,
    interval: (f64, f64),
) -> Result<Complex64> {
    jacobi_ray_transform_with(f, ytilde, interval, DEFAULT_SIMPSON_PANELS)
}

/// As [`jacobi_ray_transform`] with an explicit (even) panel count.
///
/// The square root uses the principal branch. A conjugate point aborts: it
/// shows up as a sign change of `det Ytilde` between nodes, or, when both
/// eigenvalues vanish together (isotropic focusing), as real eigenvalues
/// that all flip sign while the determinant stays positive.
pub fn jacobi_ray_transform_with(
    f: impl Fn(f64) -> f64,
    ytilde: &TransversalJacobi,
    (a, b): (f64, f64),
    panels: usize,
) -> Result<Complex64> {
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::InvalidInput(format!("interval [{a}, {b}] is empty")));
    }
    if panels < 2 || !panels.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "panel count {panels} must be even and >= 2"
        )));
    }
    let h = (b - a) / panels as f64;
    let mut sign = 0.0;
    let mut prev_trace: Option<f64> = None;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..=panels {
        let t = if k == panels { b } else { a + k as f64 * h };
        let m = ytilde.eval(t);
        let det = m.determinant();
        if !det.is_finite() || det == 0.0 || (sign != 0.0 && det.signum() != sign) {
            return Err(Error::ConjugatePoint { tau: t, det });
        }
        sign = det.signum();
        let trace = m.trace();
        let real_pair = det > 0.0 && trace * trace - 4.0 * det >= -1e-12 * trace * trace;
        if real_pair {
            if prev_trace.is_some_and(|p| p * trace < 0.0) {
                return Err(Error::ConjugatePoint { tau: t, det });
            }
            prev_trace = Some(trace);
        } else {
            prev_trace = None;
        }
        let weight = Complex64::new(det, 0.0).sqrt().inv();
        let w = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += weight * (w * f(t));
    }
    Ok(sum * (h / 3.0))
}

/// Straight line `p(t) = s n + t d` with `d = (cos phi, sin phi)` and
/// `n = (-sin phi, cos phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line2D {
    offset: f64,
    angle: f64,
}

impl Line2D {
    pub fn new(offset: f64, angle: f64) -> Result<Self> {
        if !(offset.is_finite() && angle.is_finite()) {
            return Err(Error::NonFinite("line parameters"));
        }
        Ok(Self { offset, angle })
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn direction(&self) -> (f64, f64) {
        (self.angle.cos(), self.angle.sin())
    }

    pub fn normal(&self) -> (f64, f64) {
        (-self.angle.sin(), self.angle.cos())
    }

    pub fn point(&self, t: f64) -> (f64, f64) {
        let (dx, dy) = self.direction();
        let (nx, ny) = self.normal();
        (self.offset * nx + t * dx, self.offset * ny + t * dy)
    }

    /// Parameter range inside the box `[-h, h]^2`, if the line meets it.
    pub fn clip_to_box(&self, h: f64) -> Option<(f64, f64)> {
        let (p0x, p0y) = self.point(0.0);
        let (dx, dy) = self.direction();
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (p, d) in [(p0x, dx), (p0y, dy)] {
            if d.abs() < 1e-15 {
                if p.abs() > h {
                    return None;
                }
            } else {
                let (a, b) = ((-h - p) / d, (h - p) / d);
                lo = lo.max(a.min(b));
                hi = hi.min(a.max(b));
            }
        }
        (hi > lo).then_some((lo, hi))
    }
}

/// Result of [`xray_transform`]; `intersects` is false (and `value` zero)
/// when the line misses the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XrayValue {
    pub value: f64,
    pub intersects: bool,
}

/// Trapezoid nodes per grid spacing along a line.
pub const XRAY_SAMPLES_PER_CELL: usize = 4;

/// Line integral of the bilinear interpolant of `f` by the composite
/// trapezoid rule at spacing at most `min(dx, dy) / XRAY_SAMPLES_PER_CELL`.
pub fn xray_transform(f: &RealField, line: &Line2D) -> XrayValue {
    xray_transform_with(f, line, 1)
}

/// As [`xray_transform`] with the spacing further divided by `refine`.
pub fn xray_transform_with(f: &RealField, line: &Line2D, refine: usize) -> XrayValue {
    let grid = f.grid();
    let Some((t0, t1)) = line.clip_to_box(0.5 * grid.length()) else {
        return XrayValue {
            value: 0.0,
            intersects: false,
        };
    };
    let spacing = grid.dx().min(grid.dy()) / (XRAY_SAMPLES_PER_CELL * refine.max(1)) as f64;
    let n = uniform_steps(t1 - t0, spacing);
    let h = (t1 - t0) / n as f64;
    let mut sum = 0.0;
    for k in 0..=n {
        let t = if k == n { t1 } else { t0 + k as f64 * h };
        let (x, y) = line.point(t);
        let v = f.sample(x, y);
        sum += if k == 0 || k == n { 0.5 * v } else { v };
    }
    XrayValue {
        value: sum * h,
        intersects: true,
    }
}
