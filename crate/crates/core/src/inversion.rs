//! Filtered back-projection through the paraxial forward model:
//! `beta ~ c * Re W*[h *_y W[beta]]` with `h` the Ram-Lak ramp and `W*` the
//! exact conjugate transpose of the discrete forward map.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid2D, RealField};
use crate::paraxial::{forward_map, MarchOptions, Marcher, Sinogram, WaveParams};
use crate::phantom::{disk, RotationOperator};

/// Angles back-projected together before their partial fields are summed.
/// Fixed so the summation order never depends on the worker count.
const ANGLE_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    RamLak,
    RamLakHann,
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ramlak" => Ok(FilterKind::RamLak),
            "ramlak_hann" => Ok(FilterKind::RamLakHann),
            other => Err(Error::ValueOutOfRange {
                key: "filter.kind".into(),
                reason: format!("`{other}` is not one of ramlak, ramlak_hann"),
            }),
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::RamLak => "ramlak",
            FilterKind::RamLakHann => "ramlak_hann",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampFilterSpec {
    kind: FilterKind,
    cutoff_fraction: f64,
}

impl Default for RampFilterSpec {
    fn default() -> Self {
        Self {
            kind: FilterKind::RamLak,
            cutoff_fraction: 1.0,
        }
    }
}

impl RampFilterSpec {
    pub fn new(kind: FilterKind, cutoff_fraction: f64) -> Result<Self> {
        if !(cutoff_fraction > 0.0 && cutoff_fraction <= 1.0) {
            return Err(Error::ValueOutOfRange {
                key: "filter.cutoff".into(),
                reason: format!("{cutoff_fraction} not in (0, 1]"),
            });
        }
        Ok(Self {
            kind,
            cutoff_fraction,
        })
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn cutoff_fraction(&self) -> f64 {
        self.cutoff_fraction
    }

    /// Multiplier for DFT bin `m` of an `n`-point transform with spacing `dy`.
    pub fn response(&self, m: usize, n: usize, dy: f64) -> f64 {
        let signed = if m <= n / 2 {
            m as f64
        } else {
            m as f64 - n as f64
        };
        let omega = 2.0 * PI * signed.abs() / (n as f64 * dy);
        let cutoff = self.cutoff_fraction * PI / dy;
        if m == 0 || omega > cutoff * (1.0 + 1e-12) {
            return 0.0;
        }
        match self.kind {
            FilterKind::RamLak => omega,
            FilterKind::RamLakHann => omega * 0.5 * (1.0 + (PI * omega / cutoff).cos()),
        }
    }
}

/// Ramp-filters every angle row along `y` through the DFT.
pub fn ramp_filter(sino: &Sinogram, spec: &RampFilterSpec) -> Result<Sinogram> {
    let n = sino.n_y();
    if n < 4 {
        return Err(Error::TooFewSamples(n));
    }
    let dy = sino.dy();
    let profile: Vec<f64> = (0..n).map(|m| spec.response(m, n, dy)).collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let scale = 1.0 / n as f64;
    let mut values = sino.values().clone();
    for mut row in values.rows_mut() {
        let buf = row.as_slice_mut().expect("standard layout");
        fwd.process(buf);
        for (c, h) in buf.iter_mut().zip(&profile) {
            *c *= h * scale;
        }
        inv.process(buf);
    }
    Ok(sino.with_values(values))
}

/// Exact adjoint of [`crate::paraxial::forward_map_complex`] under the
/// weighted pairings `<.,.>_sinogram` and `<.,.>_field`.
///
/// For each angle the terminal data are back-propagated through the
/// transposed Crank-Nicolson recurrence, scattered through the transposed
/// rotation, and summed with weight `dtheta / dx`.
pub fn adjoint_map_complex(sino: &Sinogram) -> Result<ComplexField> {
    adjoint_map_with(sino, MarchOptions::default())
}

pub fn adjoint_map_with(sino: &Sinogram, options: MarchOptions) -> Result<ComplexField> {
    let grid = sino.grid();
    let marcher = Marcher::new(grid, sino.params(), options)?;
    let mut acc = Array2::<Complex64>::zeros(grid.shape());
    let angles = sino.angles();
    for chunk_start in (0..angles.len()).step_by(ANGLE_CHUNK) {
        let chunk_end = (chunk_start + ANGLE_CHUNK).min(angles.len());
        let partials: Vec<Array2<Complex64>> = (chunk_start..chunk_end)
            .into_par_iter()
            .map(|a| {
                let eta = sino.values().row(a).to_vec();
                let sens = marcher.final_slice_adjoint(&eta)?;
                let op = RotationOperator::new(angles[a], grid);
                Ok(op.apply_transpose(&sens))
            })
            .collect::<Result<_>>()?;
        for p in partials {
            acc += &p;
        }
    }
    let weight = sino.angle_weight() / grid.dx();
    acc.mapv_inplace(|v| v * weight);
    ComplexField::new(grid, acc)
}

/// Real part of [`adjoint_map_complex`].
pub fn adjoint_map(sino: &Sinogram) -> Result<RealField> {
    Ok(adjoint_map_complex(sino)?.re())
}

/// Which real image is extracted from the complex back-projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImagePart {
    #[default]
    Real,
    Modulus,
}

impl FromStr for ImagePart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(ImagePart::Real),
            "modulus" => Ok(ImagePart::Modulus),
            other => Err(Error::ValueOutOfRange {
                key: "recon.part".into(),
                reason: format!("`{other}` is not one of real, modulus"),
            }),
        }
    }
}

fn extract(field: &ComplexField, part: ImagePart) -> RealField {
    match part {
        ImagePart::Real => field.re(),
        ImagePart::Modulus => field.modulus(),
    }
}

/// Image-quality figures of a reconstruction against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageMetrics {
    pub relative_l2: f64,
    pub ncc: f64,
    pub psnr_db: f64,
}

pub const PSNR_CAP_DB: f64 = 300.0;

pub fn metrics(recon: &RealField, truth: &RealField) -> Result<ImageMetrics> {
    recon.grid().ensure_same(truth.grid())?;
    let r = recon.values();
    let t = truth.values();
    let t_norm2: f64 = t.iter().map(|v| v * v).sum();
    if t_norm2 == 0.0 {
        return Err(Error::ZeroTruth);
    }
    let diff2: f64 = r.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let relative_l2 = (diff2 / t_norm2).sqrt();

    let n = r.len() as f64;
    let r_mean = r.sum() / n;
    let t_mean = t.sum() / n;
    let (mut cov, mut rv, mut tv) = (0.0, 0.0, 0.0);
    for (a, b) in r.iter().zip(t.iter()) {
        let da = a - r_mean;
        let db = b - t_mean;
        cov += da * db;
        rv += da * da;
        tv += db * db;
    }
    let ncc = if rv > 0.0 && tv > 0.0 {
        (cov / (rv * tv).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };

    let mse = diff2 / n;
    let psnr_db = if mse > 0.0 {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    } else {
        PSNR_CAP_DB
    };
    Ok(ImageMetrics {
        relative_l2,
        ncc,
        psnr_db,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconReport {
    pub reconstruction: RealField,
    pub calibration_scale: f64,
    pub metrics: Option<ImageMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconOptions {
    pub filter: RampFilterSpec,
    pub part: ImagePart,
}

impl Default for ReconOptions {
    fn default() -> Self {
        Self {
            filter: RampFilterSpec::default(),
            part: ImagePart::Real,
        }
    }
}

/// Radius (fraction of `L`) of the calibration disk.
pub const CALIBRATION_RADIUS: f64 = 0.25;
/// Interior means are compared inside this fraction of the disk radius.
const CALIBRATION_INNER: f64 = 0.6;

/// Uncalibrated pipeline `part(W*[h *_y sino])`.
pub fn filtered_backprojection(sino: &Sinogram, options: &ReconOptions) -> Result<RealField> {
    let filtered = ramp_filter(sino, &options.filter)?;
    Ok(extract(&adjoint_map_complex(&filtered)?, options.part))
}

/// Amplitude scale for a given grid, angle set and `L / lambda`: a centred
/// unit disk is pushed through forward model and pipeline, and the interior
/// means are matched.
pub fn calibration_scale(
    grid: Grid2D,
    angles: &[f64],
    params: &WaveParams,
    options: &ReconOptions,
) -> Result<f64> {
    let radius = CALIBRATION_RADIUS * grid.length();
    let truth = disk(grid, radius, 1.0, grid.dx()).field;
    let sino = forward_map(&truth, angles, params)?;
    let recon = filtered_backprojection(&sino, options)?;
    let inner = CALIBRATION_INNER * radius;
    let (mut sum_t, mut sum_r) = (0.0, 0.0);
    for ((i, j), t) in truth.values().indexed_iter() {
        if grid.x(i).hypot(grid.y(j)) <= inner {
            sum_t += t;
            sum_r += recon.values()[[i, j]];
        }
    }
    if !(sum_r.is_finite() && sum_r.abs() > 0.0) {
        return Err(Error::InvalidInput(
            "calibration disk reconstructs to zero mean; grid too coarse".into(),
        ));
    }
    Ok(sum_t / sum_r)
}

/// Calibrated reconstruction; metrics are filled when `truth` is given.
pub fn reconstruct(
    sino: &Sinogram,
    options: &ReconOptions,
    truth: Option<&RealField>,
) -> Result<ReconReport> {
    let grid = sino.grid();
    if let Some(t) = truth {
        grid.ensure_same(t.grid())?;
    }
    let all_zero = sino.values().iter().all(|v| v.norm() == 0.0);
    let (reconstruction, calibration_scale) = if all_zero {
        (RealField::zeros(grid), 1.0)
    } else {
        let raw = filtered_backprojection(sino, options)?;
        let scale = calibration_scale(grid, sino.angles(), sino.params(), options)?;
        let scaled = raw.values().mapv(|v| v * scale);
        (RealField::new(grid, scaled)?, scale)
    };
    let metrics = match truth {
        Some(t) => Some(metrics(&reconstruction, t)?),
        None => None,
    };
    Ok(ReconReport {
        reconstruction,
        calibration_scale,
        metrics,
    })
}

impl ReconReport {
    /// Plain-text `key = value` summary.
    pub fn to_text(&self) -> String {
        let mut s = format!("calibration_scale = {:.12e}\n", self.calibration_scale);
        if let Some(m) = &self.metrics {
            s += &format!(
                "relative_l2_error = {:.12e}\nncc = {:.12e}\npsnr_db = {:.12e}\n",
                m.relative_l2, m.ncc, m.psnr_db
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paraxial::uniform_angles;

    fn sino_from_rows(rows: Array2<Complex64>) -> Sinogram {
        let n_a = rows.nrows();
        Sinogram::new(
            uniform_angles(n_a),
            rows,
            WaveParams::new(1.0, 10.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn response_shape() {
        let spec = RampFilterSpec::default();
        let dy = 0.1;
        assert_eq!(spec.response(0, 8, dy), 0.0);
        assert!((spec.response(1, 8, dy) - 2.0 * PI / 0.8).abs() < 1e-12);
        assert_eq!(spec.response(1, 8, dy), spec.response(7, 8, dy));
        // Nyquist bin is kept at full cutoff
        assert!((spec.response(4, 8, dy) - PI / dy).abs() < 1e-12);
        let half = RampFilterSpec::new(FilterKind::RamLak, 0.5).unwrap();
        assert_eq!(half.response(3, 8, dy), 0.0);
        let hann = RampFilterSpec::new(FilterKind::RamLakHann, 1.0).unwrap();
        assert!(hann.response(4, 8, dy).abs() < 1e-12);
    }

    #[test]
    fn zero_sinogram_filters_to_zero() {
        let s = sino_from_rows(Array2::zeros((2, 16)));
        let f = ramp_filter(&s, &RampFilterSpec::default()).unwrap();
        assert!(f.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn too_few_samples() {
        let s = sino_from_rows(Array2::zeros((1, 3)));
        assert!(matches!(
            ramp_filter(&s, &RampFilterSpec::default()),
            Err(Error::TooFewSamples(3))
        ));
    }

    #[test]
    fn fourier_mode_is_eigenvector() {
        let n = 32;
        let m = 5;
        let rows = Array2::from_shape_fn((1, n), |(_, j)| {
            Complex64::from_polar(1.0, 2.0 * PI * (m * j) as f64 / n as f64)
        });
        let s = sino_from_rows(rows.clone());
        let spec = RampFilterSpec::default();
        let f = ramp_filter(&s, &spec).unwrap();
        let lambda = spec.response(m, n, s.dy());
        for (a, b) in f.values().iter().zip(rows.iter()) {
            assert!((a - b * lambda).norm() < 1e-10 * lambda);
        }
    }

    #[test]
    fn metric_examples() {
        let grid = Grid2D::square(8, 1.0).unwrap();
        let t = RealField::from_fn(grid, |x, y| 0.5 + x * y).unwrap();
        let m = metrics(&t, &t).unwrap();
        assert_eq!(m.relative_l2, 0.0);
        assert!((m.ncc - 1.0).abs() < 1e-12);
        assert_eq!(m.psnr_db, PSNR_CAP_DB);

        let m = metrics(&RealField::zeros(grid), &t).unwrap();
        assert!((m.relative_l2 - 1.0).abs() < 1e-15);
        assert_eq!(m.ncc, 0.0);

        let doubled = RealField::new(grid, t.values().mapv(|v| 2.0 * v)).unwrap();
        let m = metrics(&doubled, &t).unwrap();
        assert!((m.ncc - 1.0).abs() < 1e-12);
        assert!((m.relative_l2 - 1.0).abs() < 1e-12);

        assert!(matches!(
            metrics(&t, &RealField::zeros(grid)),
            Err(Error::ZeroTruth)
        ));
        let other = RealField::zeros(Grid2D::square(9, 1.0).unwrap());
        assert!(matches!(metrics(&other, &t), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn zero_sinogram_reconstructs_to_zero() {
        let s = sino_from_rows(Array2::zeros((4, 16)));
        let r = reconstruct(&s, &ReconOptions::default(), None).unwrap();
        assert_eq!(r.calibration_scale, 1.0);
        assert!(r.reconstruction.values().iter().all(|v| *v == 0.0));
        assert!(adjoint_map(&s).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn parse_kinds() {
        assert_eq!(
            "ramlak_hann".parse::<FilterKind>().unwrap(),
            FilterKind::RamLakHann
        );
        assert!("hann".parse::<FilterKind>().is_err());
        assert_eq!("modulus".parse::<ImagePart>().unwrap(), ImagePart::Modulus);
    }
}
