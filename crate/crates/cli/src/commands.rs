//! Subcommand bodies operating on the merged configuration.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use paraxial_tomo::beam::{
    conserved_c0, relative_drift, solve_yz, xray_transform, CurvatureProfile, Line2D,
};
use paraxial_tomo::inversion::{
    metrics as image_metrics, reconstruct as fbp, ImageMetrics, ReconOptions,
};
use paraxial_tomo::io::{
    read_rf64, read_wvsg, write_pgm, write_pgm_rendering, write_real_rf64, write_wvsg, ToolConfig,
};
use paraxial_tomo::paraxial::{
    forward_map, forward_map_complex, march_envelope, stepped_angles, uniform_angles,
};
use paraxial_tomo::phantom::{disk, load_raster, shepp_logan, to_pgm16, Phantom};
use paraxial_tomo::westervelt::{
    observed_order, second_linearization, verify_integral_identity, Westervelt1DConfig,
};
use paraxial_tomo::{ComplexField, Error, Grid2D, RealField, Result, Sinogram, WaveParams};

const DEFAULT_N: usize = 256;
const DEFAULT_ANGLES: usize = 360;
const DEFAULT_L_OVER_LAMBDA: f64 = 100.0;

fn required<'a>(cfg: &'a ToolConfig, key: &str, flag: &str) -> Result<&'a str> {
    cfg.get(key)
        .ok_or_else(|| Error::InvalidInput(format!("missing {flag} (config key `{key}`)")))
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn write_text(path: &str, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn build_phantom(cfg: &ToolConfig) -> Result<Phantom> {
    let n = cfg.get_usize("grid.n").unwrap_or(DEFAULT_N);
    let length = cfg.get_f64("grid.length").unwrap_or(1.0);
    let grid = Grid2D::square(n, length)?;
    match cfg.get("phantom.kind").unwrap_or("shepp-logan") {
        "disk" => {
            let radius = cfg.get_f64("phantom.radius").unwrap_or(0.25 * length);
            Ok(disk(grid, radius, 1.0, grid.dx()))
        }
        "raster" => load_raster(required(cfg, "phantom.path", "--image")?, grid),
        _ => Ok(shepp_logan(grid)),
    }
}

fn angle_set(cfg: &ToolConfig) -> Vec<f64> {
    let count = cfg.get_usize("angles.count").unwrap_or(DEFAULT_ANGLES);
    let step = cfg
        .get_f64("angles.step_deg")
        .unwrap_or(360.0 / count as f64);
    stepped_angles(count, step)
}

fn synthesize(cfg: &ToolConfig, field: &RealField) -> Result<Sinogram> {
    let lol = cfg
        .get_f64("wave.l_over_lambda")
        .unwrap_or(DEFAULT_L_OVER_LAMBDA);
    let params = WaveParams::new(field.grid().length(), lol)?;
    forward_map(field, &angle_set(cfg), &params)
}

pub fn phantom(cfg: &ToolConfig, pgm: Option<&Path>) -> Result<()> {
    let out = required(cfg, "paths.phantom", "--out")?;
    let p = build_phantom(cfg)?;
    write_real_rf64(out, &p.field)?;
    if let Some(pgm) = pgm {
        write_pgm(pgm, &to_pgm16(&p.field))?;
    }
    println!(
        "wrote {} phantom ({} x {}) to {out}",
        p.name,
        p.field.grid().n_x(),
        p.field.grid().n_y()
    );
    Ok(())
}

pub fn forward(cfg: &ToolConfig, phantom_path: Option<&Path>) -> Result<()> {
    let out = required(cfg, "paths.sino", "--out")?;
    let field = match phantom_path {
        Some(p) => read_rf64(p)?.into_real()?,
        None => build_phantom(cfg)?.field,
    };
    let sino = synthesize(cfg, &field)?;
    write_wvsg(out, &sino)?;
    if let Some(path) = cfg.get("paths.envelope") {
        let v = march_envelope(&field, sino.params())?;
        write_pgm_rendering(path, &v.modulus())?;
    }
    println!(
        "wrote sinogram ({} angles x {} samples, L/lambda = {}) to {out}",
        sino.angles().len(),
        sino.n_y(),
        sino.params().l_over_lambda()
    );
    Ok(())
}

fn metrics_text(m: &ImageMetrics) -> String {
    format!(
        "relative_l2_error = {:.6e}\nncc = {:.6}\npsnr_db = {:.3}",
        m.relative_l2, m.ncc, m.psnr_db
    )
}

pub fn reconstruct(cfg: &ToolConfig, sino_path: Option<&Path>) -> Result<()> {
    let out = required(cfg, "paths.out", "--out")?;
    let (sino, synthesized_truth) = match sino_path {
        Some(p) => (read_wvsg(p)?, None),
        None => {
            let truth = build_phantom(cfg)?.field;
            (synthesize(cfg, &truth)?, Some(truth))
        }
    };
    let truth = match cfg.get("paths.truth") {
        Some(p) => Some(read_rf64(p)?.into_real()?),
        None => synthesized_truth,
    };
    let options = ReconOptions {
        filter: cfg.filter_spec()?,
        part: cfg.get("recon.part").unwrap_or("real").parse()?,
    };
    let report = fbp(&sino, &options, truth.as_ref())?;
    write_real_rf64(out, &report.reconstruction)?;
    if let Some(pgm) = cfg.get("paths.pgm") {
        write_pgm_rendering(pgm, &report.reconstruction)?;
    }
    let mut text = format!(
        "n = {}\nangles = {}\nl_over_lambda = {}\nfilter = {}\ncutoff = {}\n{}",
        sino.n_y(),
        sino.angles().len(),
        sino.params().l_over_lambda(),
        options.filter.kind(),
        options.filter.cutoff_fraction(),
        report.to_text()
    );
    if !text.ends_with('\n') {
        text.push('\n');
    }
    if let Some(path) = cfg.get("paths.report") {
        write_text(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn random_complex(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<Complex64> {
    Array2::from_shape_simple_fn(shape, || {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub const ADJOINT_TOL: f64 = 1e-10;

pub fn adjoint_test(cfg: &ToolConfig) -> Result<bool> {
    let n = cfg.get_usize("adjoint.n").unwrap_or(64);
    let count = cfg.get_usize("adjoint.angles").unwrap_or(8);
    let seed = cfg
        .get_u64("seed")
        .ok_or_else(|| Error::InvalidInput("missing --seed (config key `seed`)".into()))?;
    let lol = cfg.get_f64("wave.l_over_lambda").unwrap_or(10.0);
    let grid = Grid2D::square(n, 1.0)?;
    let params = WaveParams::new(1.0, lol)?;
    let angles = uniform_angles(count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = ComplexField::new(grid, random_complex(&mut rng, grid.shape()))?;
    let eta = Sinogram::new(angles.clone(), random_complex(&mut rng, (count, n)), params)?;
    let w_beta = forward_map_complex(&beta, &angles, &params)?;
    let w_star_eta = paraxial_tomo::inversion::adjoint_map_complex(&eta)?;
    let lhs = w_beta.inner(&eta)?;
    let rhs = beta.inner(&w_star_eta)?;
    let gap = (lhs - rhs).norm() / (beta.norm() * eta.norm());
    let pass = gap <= ADJOINT_TOL;
    println!(
        "{} adjoint_exactness n={n} angles={count} seed={seed} relative_gap={gap:.3e} tol={ADJOINT_TOL:.0e}",
        verdict(pass)
    );
    Ok(pass)
}

pub const RICCATI_DRIFT_TOL: f64 = 1e-6;
pub const RICCATI_CLOSED_FORM_TOL: f64 = 1e-8;

pub fn riccati_check(cfg: &ToolConfig) -> Result<bool> {
    let spec = cfg.get("riccati.profile").unwrap_or("flat");
    let step = cfg.get_f64("riccati.step").unwrap_or(1e-3);
    let tau_end = cfg.get_f64("riccati.tau_end").unwrap_or(1.0);
    let profile = CurvatureProfile::parse(spec, 0.0, tau_end)?;
    let i = Complex64::new(0.0, 1.0);
    let y0 = nalgebra::Matrix3::<Complex64>::identity();
    let traj = solve_yz(&profile, y0, y0 * i, step)?;
    let c0 = conserved_c0(&traj);
    let drift = relative_drift(&c0);
    let mut pass = drift <= RICCATI_DRIFT_TOL;
    println!(
        "{} riccati_conservation profile={} samples={} c0_mean={:.12} relative_drift={drift:.3e} tol={RICCATI_DRIFT_TOL:.0e}",
        verdict(drift <= RICCATI_DRIFT_TOL),
        profile.label(),
        traj.len(),
        c0.iter().sum::<f64>() / c0.len() as f64,
    );
    if profile.label() == "flat" {
        let err = traj
            .iter()
            .map(|s| {
                let a = i / (Complex64::new(1.0, 0.0) + i * (2.0 * s.tau));
                let exact = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(i, a, a));
                (s.h - exact).iter().map(|v| v.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let ok = err <= RICCATI_CLOSED_FORM_TOL;
        pass &= ok;
        println!(
            "{} riccati_closed_form max_abs_error={err:.3e} tol={RICCATI_CLOSED_FORM_TOL:.0e}",
            verdict(ok)
        );
    }
    Ok(pass)
}

pub const XRAY_TOL: f64 = 1e-3;

pub fn xray(cfg: &ToolConfig) -> Result<bool> {
    let offset = cfg.get_f64("xray.offset").unwrap_or(0.0);
    let angle = cfg.get_f64("xray.angle_deg").unwrap_or(0.0).to_radians();
    let line = Line2D::new(offset, angle)?;
    if let Some(path) = cfg.get("paths.phantom") {
        let field = read_rf64(path)?.into_real()?;
        let r = xray_transform(&field, &line);
        println!("xray value={:.12e} intersects={}", r.value, r.intersects);
        return Ok(true);
    }
    let n = cfg.get_usize("xray.n").unwrap_or(1001);
    let grid = Grid2D::square(n, 2.2)?;
    let field = disk(grid, 1.0, 1.0, grid.dx()).field;
    let r = xray_transform(&field, &line);
    let exact = if offset.abs() < 1.0 {
        2.0 * (1.0 - offset * offset).sqrt()
    } else {
        0.0
    };
    let err = (r.value - exact).abs();
    let pass = err <= XRAY_TOL;
    println!(
        "{} xray_unit_disk offset={offset} value={:.9} exact={exact:.9} abs_error={err:.3e} tol={XRAY_TOL:.0e}",
        verdict(pass),
        r.value
    );
    Ok(pass)
}

pub const IDENTITY_GAP_TOL: f64 = 0.05;
pub const IDENTITY_MIN_ORDER: f64 = 1.0;
pub const POLARIZATION_MIN_ORDER: f64 = 0.9;

pub fn westervelt_check(cfg: &ToolConfig) -> Result<bool> {
    let finest = cfg.get_usize("westervelt.n_x").unwrap_or(800);
    let eps = cfg.get_f64("westervelt.eps").unwrap_or(1e-3);
    let levels = [finest / 4, finest / 2, finest];
    let mut hs = Vec::new();
    let mut gaps = Vec::new();
    for &n_x in &levels {
        let c = Westervelt1DConfig::reference(n_x)?;
        let check = verify_integral_identity(&c)?;
        println!(
            "identity n_x={n_x} lhs={:.9e} rhs={:.9e} relative_gap={:.3e}",
            check.lhs, check.rhs, check.relative_gap
        );
        hs.push(c.dx());
        gaps.push(check.relative_gap);
    }
    let order = observed_order(&hs, &gaps);
    let gap_ok = gaps[2] <= IDENTITY_GAP_TOL;
    let order_ok = order >= IDENTITY_MIN_ORDER;
    println!(
        "{} integral_identity n_x={finest} relative_gap={:.3e} tol={IDENTITY_GAP_TOL}",
        verdict(gap_ok),
        gaps[2]
    );
    println!(
        "{} integral_identity_order observed={order:.3} min={IDENTITY_MIN_ORDER}",
        verdict(order_ok)
    );

    let mut epss = Vec::new();
    let mut errs = Vec::new();
    for k in 0..3 {
        let mut c = Westervelt1DConfig::reference(levels[0])?;
        let e = eps / f64::powi(2.0, k);
        c.eps1 = e;
        c.eps2 = e;
        let pol = second_linearization(&c)?;
        let err = pol.u_fd.relative_difference(&pol.u_direct);
        println!("polarization eps={e:.3e} relative_difference={err:.3e}");
        epss.push(e);
        errs.push(err);
    }
    let pol_order = observed_order(&epss, &errs);
    let pol_ok = pol_order >= POLARIZATION_MIN_ORDER;
    println!(
        "{} polarization_order observed={pol_order:.3} min={POLARIZATION_MIN_ORDER}",
        verdict(pol_ok)
    );
    Ok(gap_ok && order_ok && pol_ok)
}

pub fn metrics(cfg: &ToolConfig) -> Result<()> {
    let recon = read_rf64(required(cfg, "paths.out", "--recon")?)?.into_real()?;
    let truth = match cfg.get("paths.truth") {
        Some(p) => read_rf64(p)?.into_real()?,
        None if cfg.get("phantom.kind").is_some() => build_phantom(cfg)?.field,
        None => {
            return Err(Error::InvalidInput(
                "missing --truth (config key `paths.truth`)".into(),
            ))
        }
    };
    let m = image_metrics(&recon, &truth)?;
    let text = metrics_text(&m) + "\n";
    if let Some(path) = cfg.get("paths.report") {
        write_text(path, &text)?;
    }
    print!("{text}");
    Ok(())
}
