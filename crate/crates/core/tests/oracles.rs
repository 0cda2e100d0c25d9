//! Frozen values from independent evaluations and closed-form oracles.

use nlh_core::evolution::double_bump_ensemble;
use nlh_core::harness::fit::fit_exponent;
use nlh_core::kernels::library::{cosine_profile, heat};
use nlh_core::kernels::{check_conditions, zeta0, Extent, SamplingPlan};
use nlh_core::nonlinear::{solve_nonlinear, NonlinearOptions, NonlinearProblem, Phi};
use nlh_core::nonlocal_op::{apply, verify_duality, verify_mean_zero};
use nlh_core::solver::{solve_with, SolveOptions};
use nlh_core::testclass::{holder_seminorm, membership, pairing};
use nlh_core::*;
use std::f64::consts::PI;

// 2·11^{5/2} and 2·11^{10/3}, evaluated with 40-digit decimal arithmetic.
const ZETA0_1_04: f64 = 802.623_199_266_006_8;
const ZETA0_2_03: f64 = 5_920.235_001_095_518;

#[test]
fn zeta0_closed_form() {
    assert!((zeta0(1, 0.4) - ZETA0_1_04).abs() < 1e-9);
    assert!((zeta0(2, 0.3) / ZETA0_2_03 - 1.0).abs() < 1e-13);
    // the ball term only wins for large γ
    assert!((zeta0(1, 3.0) - 2.0 * 11f64.powf(1.0 / 3.0)).abs() < 1e-12);
    assert!((zeta0(2, 0.3) - (8.0 / PI).sqrt()).abs() > 1.0);
}

#[test]
fn symbol_at_unit_frequency() {
    let k = heat(1, 1.0).unwrap();
    let r = 16.0 * PI;
    let g = Grid::d1(2048, r);
    let f = GridFunction::from_fn(g, Exterior::Zero, |x| x[0].cos());
    let out = apply(&k, &f, 0.0).unwrap();
    for i in 0..g.len() {
        let x = g.point(i)[0];
        if x.abs() <= r / 2.0 {
            assert!((out.values.values[i] - x.cos()).abs() <= 0.02, "x = {x}");
        }
    }
}

#[test]
fn cosine_decays_like_exp() {
    let k = heat(1, 1.0).unwrap();
    let r = 16.0 * PI;
    let g = Grid::d1(2048, r);
    let w0 = GridFunction::from_fn(g, Exterior::Zero, |x| x[0].cos());
    let tr = solve_with(&k, &w0, 1.0, &SolveOptions { snapshot_stride: 50, ..Default::default() }).unwrap();
    for f in &tr.frames {
        let e = (-f.time).exp();
        let err = (0..g.len()).filter(|&i| g.point(i)[0].abs() < r / 2.0).map(|i| (f.values[i] - e * g.point(i)[0].cos()).abs()).fold(0.0, f64::max);
        assert!(err / e <= 0.03, "t = {} rel {}", f.time, err / e);
    }
}

#[test]
fn fit_recovers_perturbed_power_law() {
    let t: Vec<f64> = (0..40).map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / 39.0)).collect();
    let v: Vec<f64> = t.iter().map(|t| t.powi(-2) * (1.0 + 0.05 * t.ln().sin())).collect();
    let f = fit_exponent(&t, &v, 7).unwrap();
    assert!((f.slope + 2.0).abs() <= f.half_width.max(0.05), "{f:?}");
    let exact: Vec<f64> = t.iter().map(|t| t.powi(-2)).collect();
    let f = fit_exponent(&t, &exact, 7).unwrap();
    assert!((f.slope + 2.0).abs() < 1e-3 && f.half_width < 1e-3);
    let short: Vec<f64> = (0..5).map(|i| 1.0 + 0.5 * i as f64).collect();
    assert!(fit_exponent(&short, &short, 7).is_err());
}

#[test]
fn fractional_heat_has_zero_defects() {
    for alpha in [0.5, 1.5] {
        let k = heat(1, alpha).unwrap();
        let rep = check_conditions(&k, &SamplingPlan::default_for(1, 8.0, 1.0 / 16.0, 1.0)).unwrap();
        assert!(rep.pass());
        assert_eq!(rep.symmetry_max_defect, 0.0);
        assert!(rep.cancellation_profile.iter().all(|r| r.moment == 0.0));
    }
}

#[test]
fn radial_profile_cancels() {
    let k = cosine_profile(1, 1.5).unwrap();
    let rep = check_conditions(&k, &SamplingPlan::default_for(1, 8.0, 1.0 / 16.0, 1.0)).unwrap();
    assert!(rep.pass());
    for row in &rep.cancellation_profile {
        assert!(row.moment.abs() <= rep.sphere_quadrature_tolerance, "{row:?}");
    }
}

#[test]
fn rescale_to_canonical_zeta() {
    let z0 = zeta0(1, 0.25);
    let mut p = KernelParams::new(1, 0.5, 0.0, 5.02);
    p.zeta = Extent::Finite(0.5 * z0);
    let k = Kernel::fractional_heat(p).unwrap();
    let g = Grid::d1(64, 4.0);
    let w = GridFunction::from_fn(g, Exterior::Zero, |x| (-x[0] * x[0]).exp());
    let (kr, wr) = k.rescale(&w, 0.5).unwrap();
    assert!((kr.params.zeta.value() - z0).abs() <= 1e-9 * z0);
    assert_eq!(kr.eval(0.3, &[1.0], &[0.7]), k.eval(0.3, &[1.0], &[0.7]));
    let i = g.len() / 2 + 10;
    let x = g.point(i)[0];
    assert!((wr.values[i] - (-(0.5 * x) * (0.5 * x)).exp()).abs() < 1e-2);
}

#[test]
fn mollified_constant_is_constant() {
    let k = heat(1, 0.5).unwrap();
    let c = k.eval(0.0, &[0.0], &[1.0]);
    let m = k.mollify(0.01).unwrap();
    assert_eq!(m.params.lambda, 2.0 * k.params.lambda);
    for z in [0.05, 1.0, 10.0, 99.0] {
        assert!((m.eval(0.5, &[0.3], &[z]) - c).abs() <= 1e-12 * c, "z = {z}");
    }
}

#[test]
fn duality_and_mean_zero_within_error_estimates() {
    let k = heat(1, 0.5).unwrap();
    let g = Grid::d1(512, 16.0);
    let f = GridFunction::from_fn(g, Exterior::Zero, |x| (-(x[0] - 1.0).powi(2)).exp());
    let h = GridFunction::from_fn(g, Exterior::Zero, |x| (-(x[0] + 1.0).powi(2)).exp());
    let d = verify_duality(&k, &f, &h, 0.0).unwrap();
    assert!(d.residual <= 10.0 * d.error_scale + 1e-14, "{d:?}");
    let m = verify_mean_zero(&k, &f, 0.0).unwrap();
    assert!(m.residual <= 10.0 * m.error_scale + 1e-14, "{m:?}");
}

#[test]
fn pairing_against_holder_profile() {
    let (gamma, beta, r) = (0.25, 0.2, 0.5);
    let g = Grid::d1(2048, 8.0);
    let w = GridFunction::from_fn(g, Exterior::Constant, |x| x[0].abs().powf(beta).min(1.0));
    let semi = holder_seminorm(&w, beta);
    for m in double_bump_ensemble(g, &[r], 4, gamma, 3).unwrap() {
        let rep = membership(&m.phi0, r, 1e6, gamma).unwrap();
        assert!(rep.factor <= 1.0 + 1e-9, "{rep:?}");
        let p = pairing(&w, &m.phi0).unwrap();
        assert!(p.abs() <= r.powf(beta) * semi * 1.05, "pairing {p} bound {}", r.powf(beta) * semi);
    }
}

#[test]
fn gradient_sup_does_not_grow() {
    let p = KernelParams::new(1, 0.5, 0.0, 4.0);
    let g = Kernel::translation_invariant(|_| 1.0, p).unwrap();
    let theta0 = GridFunction::from_fn(Grid::d1(128, 4.0), Exterior::Constant, |x| 2.0 * (-x[0] * x[0]).exp());
    let prob = NonlinearProblem { phi: Phi::tanh_squared(0.4), g, lambda: 4.0, holder_phi: None, theta0 };
    let tr = solve_nonlinear(&prob, 1.0, &NonlinearOptions::default()).unwrap();
    assert!(tr.grad_monotone_defect <= 1e-12, "{}", tr.grad_monotone_defect);
}
