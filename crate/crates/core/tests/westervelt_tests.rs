use std::f64::consts::PI;

use ndarray::{s, Array2};
use paraxial_tomo::westervelt::{
    observed_order, second_linearization, solve_linear, solve_linear_samples, solve_nonlinear,
    staggered_energy, verify_integral_identity, BetaProfile, Direction, Pulse, Side,
    Westervelt1DConfig,
};
use paraxial_tomo::Error;

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn no_beta(n_x: usize) -> Westervelt1DConfig {
    Westervelt1DConfig {
        beta: BetaProfile::zero(),
        ..Westervelt1DConfig::reference(n_x).unwrap()
    }
}

#[test]
fn zero_beta_nonlinear_equals_linear() {
    let cfg = no_beta(200);
    let lin = solve_linear(&cfg, Side::Left, &cfg.pulse, Direction::Forward).unwrap();
    let non = solve_nonlinear(&cfg, &cfg.pulse, 1.0).unwrap();
    assert!(max_diff(&non.p, &lin.p) <= 1e-12 * max_abs(&lin.p));
    let zero = solve_linear_samples(&cfg, Side::Left, &vec![0.0; cfg.n_t], Direction::Forward).unwrap();
    assert_eq!(max_abs(&zero.p), 0.0);
}

#[test]
fn quadratic_remainder_in_amplitude() {
    // p(2a) - 2 p(a) is the second-order term: O(a^2)
    let cfg = Westervelt1DConfig::reference(200).unwrap();
    let amps = [1e-3, 5e-4, 2.5e-4];
    let rems: Vec<f64> = amps
        .iter()
        .map(|&a| {
            let p1 = solve_nonlinear(&cfg, &cfg.pulse, a).unwrap();
            let p2 = solve_nonlinear(&cfg, &cfg.pulse, 2.0 * a).unwrap();
            (&p2.p - &(&p1.p * 2.0)).iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();
    let slope = observed_order(&amps, &rems);
    assert!(slope >= 1.9, "slope {slope}");
}

#[test]
fn pulse_arrives_at_mid_domain_on_time() {
    let mut cfg = no_beta(400);
    cfg.pulse = Pulse::new(0.25, 0.15, 0.0).unwrap();
    let u = solve_linear(&cfg, Side::Left, &cfg.pulse, Direction::Forward).unwrap();
    let mid = cfg.n_x / 2;
    let col = u.p.column(mid);
    let (peak, _) = col
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |(k, m), (n, v)| if *v > m { (n, *v) } else { (k, m) });
    let expected = cfg.pulse.center + 0.5 * cfg.length / cfg.c;
    assert!((cfg.t(peak) - expected).abs() <= 2.0 * cfg.dt(), "{} vs {expected}", cfg.t(peak));
}

#[test]
fn backward_solve_is_time_reversed_forward() {
    let cfg = no_beta(200);
    let data: Vec<f64> = (0..cfg.n_t).map(|n| cfg.probe.value(cfg.t(n))).collect();
    let mut reversed = data.clone();
    reversed.reverse();
    let fwd = solve_linear_samples(&cfg, Side::Right, &reversed, Direction::Forward).unwrap();
    let bwd = solve_linear_samples(&cfg, Side::Right, &data, Direction::Backward).unwrap();
    let flipped = fwd.p.slice(s![..;-1, ..]).to_owned();
    assert!(max_diff(&bwd.p, &flipped) <= 1e-12 * max_abs(&flipped));
    // terminal levels vanish and the interior obeys the same leapfrog stencil
    let nt = cfg.n_t;
    assert!(bwd.p.row(nt - 1).iter().skip(1).take(cfg.n_x - 1).all(|v| *v == 0.0));
    assert!(bwd.p.row(nt - 2).iter().skip(1).take(cfg.n_x - 1).all(|v| *v == 0.0));
    let r = (cfg.c * cfg.dt() / cfg.dx()).powi(2);
    for n in 1..nt - 1 {
        for i in 1..cfg.n_x {
            let p = &bwd.p;
            let resid = p[[n + 1, i]] - 2.0 * p[[n, i]] + p[[n - 1, i]]
                - r * (p[[n, i + 1]] - 2.0 * p[[n, i]] + p[[n, i - 1]]);
            assert!(resid.abs() <= 1e-12);
        }
    }
}

#[test]
fn zero_beta_polarization_and_identity_vanish() {
    let cfg = no_beta(100);
    let pol = second_linearization(&cfg).unwrap();
    assert_eq!(max_abs(&pol.u_direct.p), 0.0);
    // finite differences of an exactly linear map: rounding over eps1 * eps2
    assert!(max_abs(&pol.u_fd.p) <= 1e-6 * max_abs(&pol.u1.p));
    let id = verify_integral_identity(&cfg).unwrap();
    assert_eq!((id.lhs, id.rhs, id.relative_gap), (0.0, 0.0, 0.0));
}

#[test]
fn sign_of_beta_flips_both_traces() {
    let cfg = Westervelt1DConfig::reference(100).unwrap();
    let neg = Westervelt1DConfig {
        beta: cfg.beta.scaled(-1.0),
        ..cfg.clone()
    };
    let a = second_linearization(&cfg).unwrap();
    let b = second_linearization(&neg).unwrap();
    assert_eq!(a.u_direct.p, -&b.u_direct.p);
    // the finite-difference trace agrees up to its O(eps) remainder
    let scale = max_abs(&a.u_direct.p);
    assert!(max_diff(&a.u_fd.p, &(-&b.u_fd.p)) <= 0.05 * scale);
    let ia = verify_integral_identity(&cfg).unwrap();
    let ib = verify_integral_identity(&neg).unwrap();
    assert_eq!(ia.rhs, -ib.rhs);
    assert_eq!(ia.lhs, -ib.lhs);
}

#[test]
fn doubling_beta_doubles_both_sides() {
    let cfg = Westervelt1DConfig::reference(200).unwrap();
    let twice = Westervelt1DConfig {
        beta: cfg.beta.scaled(2.0),
        ..cfg.clone()
    };
    let a = verify_integral_identity(&cfg).unwrap();
    let b = verify_integral_identity(&twice).unwrap();
    assert!((b.lhs - 2.0 * a.lhs).abs() <= 1e-12 * a.lhs.abs());
    assert!((b.rhs - 2.0 * a.rhs).abs() <= 1e-12 * a.rhs.abs());
    assert!((b.relative_gap - a.relative_gap).abs() <= 1e-10);
}

/// Bump pulse derivative by a centred difference of the exact formula.
fn derivative(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = 1e-6;
    (f(t + h) - f(t - h)) / (2.0 * h)
}

#[test]
fn identity_matches_continuum_value() {
    // with X = c = 1, u1 = f(t - x) and the backward solution u0 = f0(t + 1 - x)
    // co-propagate; reflected waves meet only where beta is negligible, so
    // rhs = 2 (int beta dx) int (f^2)'(s) f0'(s + 1) ds
    let cfg = Westervelt1DConfig::reference(800).unwrap();
    let (f, f0) = (cfg.pulse, cfg.probe);
    let int_beta = cfg.beta.amplitude * cfg.beta.sigma * (2.0 * PI).sqrt();
    let (a, b) = f.support();
    let panels = 20_000;
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for k in 0..=panels {
        let s = a + k as f64 * h;
        let w = if k == 0 || k == panels { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let g = derivative(|t| f.value(t).powi(2), s) * derivative(|t| f0.value(t), s + 1.0);
        acc += w * g;
    }
    let continuum = 2.0 * int_beta * acc * h / 3.0;
    let id = verify_integral_identity(&cfg).unwrap();
    let rel = |v: f64| (v - continuum).abs() / continuum.abs();
    assert!(continuum.abs() > 1.0);
    assert!(rel(id.rhs) <= 1e-2, "rhs {} vs {continuum}", id.rhs);
    assert!(rel(id.lhs) <= 2e-2, "lhs {} vs {continuum}", id.lhs);
}

#[test]
fn identity_gap_converges() {
    let levels = [200usize, 400, 800];
    let mut hs = Vec::new();
    let mut gaps = Vec::new();
    for &n in &levels {
        let cfg = Westervelt1DConfig::reference(n).unwrap();
        hs.push(cfg.dx());
        gaps.push(verify_integral_identity(&cfg).unwrap().relative_gap);
    }
    assert!(gaps[2] <= 0.05);
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
    assert!(observed_order(&hs, &gaps) >= 1.0);
}

#[test]
fn polarization_is_first_order_in_eps() {
    let base = Westervelt1DConfig::reference(200).unwrap();
    let eps = [1e-3, 5e-4, 2.5e-4];
    let errs: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let cfg = Westervelt1DConfig {
                eps1: e,
                eps2: e,
                ..base.clone()
            };
            let pol = second_linearization(&cfg).unwrap();
            pol.u_fd.relative_difference(&pol.u_direct)
        })
        .collect();
    assert!(observed_order(&eps, &errs) >= 0.9);
    assert!(errs[0] < 0.05);
}

#[test]
fn polarization_is_symmetric_in_the_swap() {
    let base = Westervelt1DConfig::reference(100).unwrap();
    let a = Westervelt1DConfig {
        eps1: 1e-3,
        eps2: 3e-4,
        ..base.clone()
    };
    let b = Westervelt1DConfig {
        eps1: 3e-4,
        eps2: 1e-3,
        ..base
    };
    assert_eq!(
        second_linearization(&a).unwrap().u_fd.p,
        second_linearization(&b).unwrap().u_fd.p
    );
}

#[test]
fn energy_stays_bounded_over_long_runs() {
    // 50 cells at CFL 0.5 for T = 1000: 100 001 time levels
    let n_x = 50;
    let t_final = 1000.0;
    let base = no_beta(n_x);
    let n_t = (t_final * base.c / (0.5 * base.length / n_x as f64)).round() as usize + 1;
    let cfg = Westervelt1DConfig {
        t_final,
        n_t,
        ..base
    };
    assert!(cfg.n_t > 100_000);
    let u = solve_linear(&cfg, Side::Left, &cfg.pulse, Direction::Forward).unwrap();
    let injected_until = ((cfg.pulse.support().1 / cfg.dt()).ceil() as usize) + 1;
    let injection_max = (0..injected_until)
        .map(|n| staggered_energy(&cfg, &u.p, n))
        .fold(0.0, f64::max);
    let after: Vec<f64> = (injected_until..cfg.n_t - 1)
        .map(|n| staggered_energy(&cfg, &u.p, n))
        .collect();
    assert!(injection_max > 0.0);
    let e0 = after[0];
    let worst = after.iter().fold(0.0f64, |m, e| m.max(*e));
    assert!(worst <= injection_max * (1.0 + 1e-9));
    // with zero boundary data the discrete energy is conserved
    let drift = after.iter().fold(0.0f64, |m, e| m.max((e - e0).abs())) / e0;
    assert!(drift <= 1e-9, "drift {drift}");
}

#[test]
fn large_amplitude_degenerates_coefficient() {
    let cfg = Westervelt1DConfig::reference(100).unwrap();
    assert!(matches!(
        solve_nonlinear(&cfg, &cfg.pulse, 50.0),
        Err(Error::CoefficientDegenerate { .. })
    ));
    let coarse_time = Westervelt1DConfig {
        n_t: cfg.n_t / 3,
        ..cfg
    };
    assert!(matches!(
        solve_nonlinear(&coarse_time, &coarse_time.pulse, 1e-3),
        Err(Error::CflViolation(_))
    ));
}
