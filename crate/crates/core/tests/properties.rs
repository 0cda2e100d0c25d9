use nlh_core::evolution::schedule_from;
use nlh_core::expr::{Env, Expr};
use nlh_core::harness::fit::fit_exponent;
use nlh_core::kernels::library::{cosine_profile, heat, time_dependent, x_dependent};
use nlh_core::nonlocal_op::apply;
use nlh_core::solver::{solve_with, verify_max_principle, SolveOptions};
use nlh_core::testclass::{double_bump, holder_seminorm, membership};
use nlh_core::*;
use proptest::prelude::*;

fn kernels() -> Vec<Kernel> {
    vec![heat(1, 0.5).unwrap(), cosine_profile(1, 1.5).unwrap(), x_dependent(1, 0.5).unwrap(), time_dependent(1, 1.2).unwrap()]
}

fn gaussian(g: Grid, c: f64, s: f64, a: f64) -> GridFunction {
    GridFunction::from_fn(g, Exterior::Zero, move |x| a * (-(x[0] - c).powi(2) / (2.0 * s * s)).exp())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn kernels_are_symmetric(t in 0.0..2.0f64, x in -10.0..10.0f64, y in -10.0..10.0f64, which in 0usize..4) {
        let k = &kernels()[which];
        let a = k.eval(t, &[x], &[y - x]);
        let b = k.eval(t, &[y], &[x - y]);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn telescoping_holds(r in 0.05..1.0f64, alpha in 0.1..1.9f64, delta in 0.005..0.5f64, l in 0.5..20.0f64) {
        let s = schedule_from(r, alpha, delta, l).unwrap();
        prop_assert!(s.telescoping_defect() <= 1e-12);
        for w in s.t_knots.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        if alpha <= 1.0 {
            prop_assert!(s.careful_repetition_margin(400) >= 0.0);
        }
    }

    #[test]
    fn exact_power_laws_are_fitted(p in -3.0..-0.2f64, c in 0.1..10.0f64) {
        let t: Vec<f64> = (0..20).map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / 19.0)).collect();
        let v: Vec<f64> = t.iter().map(|t| c * t.powf(p)).collect();
        let f = fit_exponent(&t, &v, 1).unwrap();
        prop_assert!((f.slope - p).abs() < 1e-9);
    }

    #[test]
    fn expressions_match_closures(a in -5.0..5.0f64, b in -5.0..5.0f64, x in -3.0..3.0f64) {
        let e = Expr::parse(&format!("({a})*x^2 - ({b})*sin(x)/(1 + |x|)")).unwrap();
        let want = a * x * x - b * x.sin() / (1.0 + x.abs());
        let got = e.eval(&Env::txz(0.0, &[x], &[0.0]));
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn operator_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, c1 in -2.0..2.0f64, c2 in -2.0..2.0f64, which in 0usize..4) {
        let k = &kernels()[which];
        let g = Grid::d1(256, 8.0);
        let f = gaussian(g, c1, 0.7, 1.0);
        let h = gaussian(g, c2, 0.5, -0.6);
        let comb = f.with_values(f.values.iter().zip(&h.values).map(|(x, y)| a * x + b * y).collect());
        let (tf, th, tc) = (apply(k, &f, 0.3).unwrap(), apply(k, &h, 0.3).unwrap(), apply(k, &comb, 0.3).unwrap());
        let scale = 1.0 + tf.values.linf() * a.abs() + th.values.linf() * b.abs();
        for i in 0..g.len() {
            let want = a * tf.values.values[i] + b * th.values.values[i];
            prop_assert!((tc.values.values[i] - want).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn constants_are_in_the_null_space(c in -50.0..50.0f64, which in 0usize..4) {
        let k = &kernels()[which];
        let g = Grid::d1(128, 4.0);
        let f = GridFunction::from_fn(g, Exterior::Constant, |_| c);
        let out = apply(k, &f, 0.2).unwrap();
        prop_assert!(out.values.linf() <= 1e-12 * (1.0 + c.abs()), "{}", out.values.linf());
    }

    #[test]
    fn maximum_principle_on_random_data(seed in any::<u64>(), which in 0usize..3) {
        let k = &kernels()[which];
        let g = Grid::d1(128, 8.0);
        let mut s = seed;
        let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 11) as f64 / (1u64 << 53) as f64 };
        let coeffs: Vec<(f64, f64, f64)> = (0..4).map(|_| (8.0 * next() - 4.0, 0.2 + next(), 2.0 * next() - 1.0)).collect();
        let w0 = GridFunction::from_fn(g, Exterior::Zero, move |x| coeffs.iter().map(|(c, s, a)| a * (-(x[0] - c).powi(2) / (s * s)).exp()).sum());
        let tr = solve_with(k, &w0, 0.5, &SolveOptions { snapshot_stride: usize::MAX, ..Default::default() }).unwrap();
        prop_assert!(verify_max_principle(&tr).pass);
    }

    #[test]
    fn membership_is_homogeneous(c in -5.0..5.0f64, weight in 0.1..2.0f64) {
        let g = Grid::d1(512, 4.0);
        let phi = double_bump(g, &[0.0], 0.3, 0.2, weight).unwrap();
        let base = membership(&phi, 0.5, 4.0, 0.3).unwrap();
        let scaled = membership(&phi.scaled(c), 0.5, 4.0, 0.3).unwrap();
        prop_assert!((scaled.factor - c.abs() * base.factor).abs() <= 1e-10 * (1.0 + base.factor));
    }

    #[test]
    fn membership_is_translation_invariant(shift in -60i64..60) {
        let g = Grid::d1(512, 4.0);
        let phi = double_bump(g, &[0.0], 0.3, 0.2, 1.0).unwrap();
        let s = shift as f64 * g.h();
        let moved = double_bump(g, &[s], 0.3, 0.2, 1.0).unwrap();
        let (a, b) = (membership(&phi, 0.5, 4.0, 0.3).unwrap(), membership(&moved, 0.5, 4.0, 0.3).unwrap());
        prop_assert!((a.factor - b.factor).abs() <= 1e-9 * a.factor);
        // the two lobes tie as optimal centers; either may be picked
        let d = (b.center[0] - a.center[0] - s).abs().min((b.center[0] + a.center[0] - s).abs());
        prop_assert!(d <= 1e-9, "{} vs {}", b.center[0], a.center[0] + s);
    }

    #[test]
    fn membership_pieces_are_monotone_in_r(r1 in 0.05..1.0f64, r2 in 0.05..1.0f64) {
        let (r1, r2) = (r1.min(r2), r1.max(r2));
        let g = Grid::d1(512, 4.0);
        let phi = double_bump(g, &[0.1], 0.25, 0.15, 1.0).unwrap();
        let (a, b) = (membership(&phi, r1, 4.0, 0.3).unwrap(), membership(&phi, r2, 4.0, 0.3).unwrap());
        prop_assert!(b.concentration_term() <= a.concentration_term() * (1.0 + 1e-12));
        prop_assert!(b.linf_term(1) >= a.linf_term(1) * (1.0 - 1e-12));
    }

    #[test]
    fn holder_seminorm_is_homogeneous(c in -4.0..4.0f64, beta in 0.05..0.95f64) {
        let g = Grid::d1(256, 4.0);
        let f = GridFunction::from_fn(g, Exterior::Zero, |x| x[0].cos() * (-x[0] * x[0] / 4.0).exp());
        let a = holder_seminorm(&f, beta);
        let b = holder_seminorm(&f.scaled(c), beta);
        prop_assert!((b - c.abs() * a).abs() <= 1e-12 * (1.0 + a));
    }
}
