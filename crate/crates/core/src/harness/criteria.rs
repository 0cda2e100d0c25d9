//! The ten acceptance criteria as runnable checks.

use crate::error::Result;
use crate::estimates::{self, EstimateOptions, REFINEMENT_TOLERANCE};
use crate::evolution::{self, CalibratedConstants, CalibrationOptions, Member, TrackOptions};
use crate::grid::{Exterior, Grid, GridFunction};
use crate::kernels::library::{cosine_profile, heat, time_dependent, x_dependent};
use crate::kernels::{Kernel, KernelParams};
use crate::nonlinear::{self, NonlinearOptions, NonlinearProblem, Phi, PhiHolder};
use crate::nonlocal_op::{self, verify_duality, verify_mean_zero, PlanOptions};
use crate::solver::{self, BumpFamily, Dt, Lp, SolveOptions, Verdict};
use crate::testclass::{bump, verify_transport_duality};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use std::path::PathBuf;
use std::time::Instant;

pub const NAMES: [&str; 10] = [
    "operator symbol oracle",
    "concentration bound profile",
    "duality and mean zero",
    "maximum principle and Lp monotonicity",
    "Linf decay exponent",
    "short-time class membership",
    "evolution schedule",
    "Holder persistence and smoothing",
    "transport duality",
    "induced kernel and nonlinear consistency",
];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub summary: String,
    pub elapsed: f64,
    pub data: serde_json::Value,
    pub files: Vec<PathBuf>,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<42} {}  ({:.1} s)  {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.elapsed,
            self.summary
        )
    }
}

/// Output directory (None writes nothing) and root seed.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Context {
    fn file(&self, name: &str, files: &mut Vec<PathBuf>) -> Result<Option<PathBuf>> {
        match &self.out {
            None => Ok(None),
            Some(d) => {
                std::fs::create_dir_all(d)?;
                let p = d.join(name);
                files.push(p.clone());
                Ok(Some(p))
            }
        }
    }

    fn seed_for(&self, stream: u64) -> u64 {
        self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stream)
    }
}

fn outcome(id: u8, t0: Instant, pass: bool, summary: String, data: serde_json::Value, files: Vec<PathBuf>) -> CriterionOutcome {
    CriterionOutcome { id, name: NAMES[id as usize - 1].into(), pass, summary, elapsed: t0.elapsed().as_secs_f64(), data, files }
}

fn fft() -> PlanOptions {
    PlanOptions { fft: Some(true), ..PlanOptions::default() }
}

pub fn criterion_1(_ctx: &Context) -> Result<CriterionOutcome> {
    let t0 = Instant::now();
    let r = 16.0 * std::f64::consts::PI;
    let g = Grid::d1(2048, r);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for alpha in [0.5, 1.0, 1.5] {
        let k = heat(1, alpha)?;
        for xi in [1.0f64, 2.0] {
            let t = Instant::now();
            let f = GridFunction::from_fn(g, Exterior::Zero, |x| (xi * x[0]).cos());
            let out = nonlocal_op::apply(&k, &f, 0.0)?;
            let sym = xi.powf(alpha);
            let err = (0..g.len())
                .filter(|&i| g.point(i)[0].abs() <= r / 2.0)
                .map(|i| (out.values.values[i] - sym * (xi * g.point(i)[0]).cos()).abs())
                .fold(0.0, f64::max)
                / sym;
            let secs = t.elapsed().as_secs_f64();
            worst = worst.max(err);
            rows.push(json!({"alpha": alpha, "xi": xi, "rel_error": err, "seconds": secs}));
            if secs > 120.0 {
                worst = f64::INFINITY;
            }
        }
    }
    let pass = worst <= 0.02;
    Ok(outcome(1, t0, pass, format!("max interior relative error {worst:.2e} (tolerance 2e-2)"), json!({"cases": rows}), vec![]))
}

pub fn criterion_2(_ctx: &Context) -> Result<CriterionOutcome> {
    let t0 = Instant::now();
    let mut rows = Vec::new();
    let mut pass = true;
    let mut worst = 0.0f64;
    for k in [heat(1, 0.5)?, cosine_profile(1, 1.5)?, x_dependent(1, 0.5)?] {
        let st = nonlocal_op::gamma_bound_study(&k, Grid::d1(1024, 64.0), 0.0, 24)?;
        let ok = st.coarse.max_ratio.is_finite() && st.fine.max_ratio.is_finite() && st.drift < 0.1;
        pass &= ok;
        worst = worst.max(st.drift);
        rows.push(json!({"kernel": k.name, "alpha": k.params.alpha, "max_coarse": st.coarse.max_ratio, "max_fine": st.fine.max_ratio, "drift": st.drift}));
    }
    Ok(outcome(2, t0, pass, format!("max drift {worst:.2e} between 1024 and 2048 points (tolerance 0.1)"), json!({"kernels": rows}), vec![]))
}

/// Random Gaussian-type pair, decaying to machine zero on [-8, 8].
fn random_pair(g: Grid, rng: &mut ChaCha8Rng) -> (GridFunction, GridFunction) {
    let (c1, s1, a) = (rng.random_range(-1.5..1.5), rng.random_range(0.4..0.8), rng.random_range(0.5..2.0));
    let (c2, s2, b0, b1) = (rng.random_range(-1.5..1.5), rng.random_range(0.4..0.8), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let f = GridFunction::from_fn(g, Exterior::Zero, move |x| a * (-(x[0] - c1).powi(2) / (2.0 * s1 * s1)).exp());
    let h = GridFunction::from_fn(g, Exterior::Zero, move |x| (b0 + b1 * x[0]) * (-(x[0] - c2).powi(2) / (2.0 * s2 * s2)).exp());
    (f, h)
}

pub fn criterion_3(ctx: &Context) -> Result<CriterionOutcome> {
    let t0 = Instant::now();
    let g = Grid::d1(512, 16.0);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed_for(3));
    let (mut dual, mut mean) = (0.0f64, 0.0f64);
    let mut rows = Vec::new();
    for (k, t) in [(heat(1, 0.5)?, 0.0), (cosine_profile(1, 1.5)?, 0.0), (x_dependent(1, 0.5)?, 0.0), (time_dependent(1, 0.5)?, 0.5)] {
        let (mut kd, mut km) = (0.0f64, 0.0f64);
        for _ in 0..10 {
            let (f, h) = random_pair(g, &mut rng);
            kd = kd.max(verify_duality(&k, &f, &h, t)?.residual);
            km = km.max(verify_mean_zero(&k, &f, t)?.residual).max(verify_mean_zero(&k, &h, t)?.residual);
        }
        rows.push(json!({"kernel": k.name, "duality": kd, "mean_zero": km}));
        dual = dual.max(kd);
        mean = mean.max(km);
    }
    let pass = dual <= 1e-6 && mean <= 1e-6;
    Ok(outcome(3, t0, pass, format!("max duality residual {dual:.1e}, mean-zero {mean:.1e} over 10 pairs x 4 kernels"), json!({"kernels": rows}), vec![]))
}

pub fn criterion_4(_ctx: &Context) -> Result<CriterionOutcome> {
    let t0 = Instant::now();
    let g = Grid::d1(512, 16.0);
    let w0 = BumpFamily { amplitude: 1.0, sigma: 1.0 }.sample(g, Exterior::Zero);
    let mut pass = true;
    let mut rows = Vec::new();
    let mut worst_mp = 0.0f64;
    for alpha in [0.5, 1.5] {
        let k = heat(1, alpha)?;
        let tr = solver::solve_with(&k, &w0, 2.0, &SolveOptions { snapshot_stride: usize::MAX, ..SolveOptions::default() })?;
        let mp = solver::verify_max_principle(&tr);
        let lp: Vec<_> = [Lp::Inf, Lp::One, Lp::Two].into_iter().map(|p| solver::verify_lp_monotone(&tr, p)).collect();
        let dt_bad = 4.0 * tr.stability_bound;
        let bad = solver::solve_with(
            &k,
            &w0,
            200.0 * dt_bad,
            &SolveOptions { dt: Dt::Fixed(dt_bad), unchecked: true, snapshot_stride: usize::MAX, ..SolveOptions::default() },
        )?;
        let control = solver::verify_lp_monotone(&bad, Lp::Inf);
        let ok = mp.pass && lp.iter().all(|r| r.pass) && !control.pass;
        pass &= ok;
        worst_mp = worst_mp.max(mp.max_excess);
        rows.push(json!({"alpha": alpha, "max_principle": mp, "lp": lp, "control_4x": control}));
    }
    Ok(outcome(4, t0, pass, format!("max-principle excess {worst_mp:.1e}; L1/L2 within tolerance; 4x CFL control fails Linf"), json!({"cases": rows}), vec![]))
}

pub fn criterion_5(ctx: &Context) -> Result<CriterionOutcome> {
    let t0 = Instant::now();
    let mut pass = true;
    let mut rows = Vec::new();
    let mut files = Vec::new();
    let mut parts = Vec::new();
    for (alpha, r, h) in [(0.5, 4000.0, 0.4), (1.5, 200.0, 0.1)] {
        let k = heat(1, alpha)?;
        let n = (2.0 * r / h) as usize;
        let d = solver::linf_decay_fit(&k, &BumpFamily { amplitude: 1.0, sigma: 1.0 }, 30.0, Grid::d1(n, r), Exterior::Zero)?;
        pass &= d.verdict == Verdict::Pass;
        let slope = d.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
        parts.push(format!("alpha {alpha}: slope {slope:.3} vs {:.3}", d.expected));
        if let Some(p) = ctx.file(&format!("c5_decay_alpha{alpha}.csv"), &mut files)? {
            let mut w = csv::Writer::from_path(p)?;
            w.write_record(["t", "linf"])?;
            for (t, v) in d.times.iter().zip(&d.linf) {
                w.write_record([format!("{t:.17e}"), format!("{v:.17e}")])?;
            }
            w.flush()?;
        }
        rows.push(json!({"alpha": alpha, "fit": d.fit, "expected": d.expected, "verdict": d.verdict}));
    }
    Ok(outcome(5, t0, pass, parts.join("; ") + " (tolerance 15%)", json!({"cases": rows}), files))
}

/// Calibration shared by criteria 6 to 8.
pub struct Calibration {
    pub kernel: Kernel,
    pub constants: CalibratedConstants,
    pub heldout: Vec<Member>,
    pub grid: Grid,
}

pub const RADII: [f64; 3] = [0.25, 0.5, 1.0];

pub fn calibration(ctx: &Context) -> Result<Calibration> {
    let kernel = heat(1, 0.5)?;
    let gamma = kernel.params.gamma;
    let grid = Grid::d1(4096, 8.0);
    let cal = evolution::double_bump_ensemble(grid, &RADII, 20, gamma, ctx.seed_for(6))?;
    let (constants, _) = evolution::calibrate(&kernel, &cal, gamma, &CalibrationOptions { plan: fft(), ..CalibrationOptions::default() })?;
    let heldout = evolution::double_bump_ensemble(grid, &RADII, 10, gamma, ctx.seed_for(60))?;
    Ok(Calibration { kernel, constants, heldout, grid })
}

pub fn criterion_6(ctx: &Context, cal: &Calibration) -> Result<CriterionOutcome> {
    let t0 = Instant::now();
    let c = &cal.constants;
    let mut files = Vec::new();
    if let Some(p) = ctx.file("c6_constants.json", &mut files)? {
        c.write_json(&p)?;
    }
    let opts = TrackOptions { plan: fft(), ..TrackOptions::default() };
    let mut worst = 0.0f64;
    let mut all = true;
    let mut rows = Vec::new();
    for (i, m) in cal.heldout.iter().enumerate() {
        let rep = evolution::track_short_time(&cal.kernel, &m.phi0, m.r, c, &opts)?;
        worst = worst.max(rep.worst_ratio);
        all &= rep.pass;
        if let Some(p) = ctx.file(&format!("c6_track_{i:02}.csv"), &mut files)? {
            rep.write_csv(&p)?;
        }
        rows.push(json!({"r": m.r, "worst_ratio": rep.worst_ratio, "pass": rep.pass}));
    }
    let inv = c.invariants();
    let inv_ok = c.invariants_hold();
    let failed: Vec<&str> = inv.iter().filter(|i| !i.pass).map(|i| i.name.as_str()).collect();
    let pass = all && inv_ok;
    let summary = format!(
        "{} held-out members, worst factor/envelope {worst:.4} (slack 5%); invariants {}",
        cal.heldout.len(),
        if inv_ok { "hold".to_string() } else { format!("fail: {}", failed.join(", ")) }
    );
    Ok(outcome(6, t0, pass, summary, json!({"constants": c, "members": rows, "invariants": inv}), files))
}

pub fn criterion_7(_ctx: &Context, cal: &Calibration) -> Result<CriterionOutcome> {
    let t0 = Instant::now();
    let c = &cal.constants;
    let (mut tel, mut margin) = (0.0f64, f64::INFINITY);
    let mut rows = Vec::new();
    for r in [0.25, 0.5] {
        let s = evolution::schedule(r, c)?;
        let d = s.telescoping_defect();
        let m = s.careful_repetition_margin(5000);
        tel = tel.max(d);
        margin = margin.min(m);
        rows.push(json!({"r": r, "k": s.k, "eta": s.eta, "telescoping_defect": d, "careful_margin": m}));
    }
    let m = cal.heldout.iter().find(|m| m.r == 0.5).unwrap_or(&cal.heldout[0]);
    let s1 = 0.5 * c.delta * m.r.powf(c.alpha);
    let z1 = c.z(m.r, s1);
    let comp = evolution::composition(&cal.kernel, &m.phi0, m.r, c, s1, 0.5 * c.delta * z1.powf(c.alpha), 0.1, &fft())?;
    let pass = tel <= 1e-12 && margin >= 0.0 && comp.pass;
    let summary = format!("telescoping defect {tel:.1e}; careful-repetition margin {margin:.3}; composition ratio {:.4} (slack 10%)", comp.ratio);
    Ok(outcome(7, t0, pass, summary, json!({"schedules": rows, "composition": comp}), vec![]))
}

pub const BETA_ALPHA_15: f64 = 0.3;

pub fn criterion_8(ctx: &Context, beta: f64) -> Result<CriterionOutcome> {
    let t0 = Instant::now();
    let mut files = Vec::new();
    let mut pass = true;
    let mut rows = Vec::new();
    let mut spread = 0.0f64;
    for (k, b, n) in [(heat(1, 0.5)?, beta, 1024), (x_dependent(1, 0.5)?, beta, 1024), (cosine_profile(1, 1.5)?, BETA_ALPHA_15, 512)] {
        let g = Grid::d1(n, 8.0);
        let w0 = estimates::holder_profile(g, b, 2.0 * g.h());
        let o = EstimateOptions { plan: fft(), ..EstimateOptions::default() };
        let r = estimates::persistence_experiment(&k, &w0, &[1.0, 4.0, 16.0], b, &o)?;
        let sups: Vec<f64> = r.horizons.iter().map(|h| h.1).collect();
        let lo = sups.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sups.iter().cloned().fold(0.0, f64::max);
        spread = spread.max(hi / lo - 1.0);
        pass &= r.pass;
        if let Some(p) = ctx.file(&format!("c8_persistence_{}.csv", k.name), &mut files)? {
            r.write_csv(&p)?;
        }
        rows.push(json!({"kernel": k.name, "beta": b, "horizons": r.horizons, "pass": r.pass}));
    }
    let k = heat(1, 0.5)?;
    let g = Grid::d1(2048, 8.0);
    let sm = estimates::smoothing_experiment(&k, |g| Ok(estimates::smoothed_step(g, 2.0 * g.h())), g, (0.1, 2.0), beta, &EstimateOptions::default())?;
    let l1 = estimates::l1_smoothing_experiment(&k, |g| bump(g, &[0.0], 0.03, Exterior::Zero), g, (0.02, 2.0), beta, &EstimateOptions::default())?;
    let wrong = EstimateOptions { exponent_override: Some(beta / k.params.alpha), refine: false, ..EstimateOptions::default() };
    let control = estimates::l1_smoothing_experiment(&k, |g| bump(g, &[0.0], 0.03, Exterior::Zero), g, (0.02, 2.0), beta, &wrong)?;
    let degrade = control.measured_constant / l1.measured_constant;
    for (name, r) in [("smoothing", &sm), ("l1_smoothing", &l1)] {
        if let Some(p) = ctx.file(&format!("c8_{name}.csv"), &mut files)? {
            r.write_csv(&p)?;
        }
    }
    pass &= sm.pass && l1.pass && degrade > 2.0;
    let summary = format!(
        "persistence spread {:.1}% (10%); smoothing C {:.3}/{:.3}, L1 C {:.3}/{:.3} (coarse/fine, {}%); wrong exponent degrades C by {degrade:.1}x",
        100.0 * spread,
        sm.measured_constant,
        sm.refined_constant.unwrap_or(f64::NAN),
        l1.measured_constant,
        l1.refined_constant.unwrap_or(f64::NAN),
        100.0 * REFINEMENT_TOLERANCE
    );
    Ok(outcome(8, t0, pass, summary, json!({"persistence": rows, "smoothing": sm, "l1_smoothing": l1, "control_constant": control.measured_constant, "degradation": degrade}), files))
}

pub fn criterion_9(_ctx: &Context) -> Result<CriterionOutcome> {
    let t0 = Instant::now();
    let k = time_dependent(1, 0.5)?;
    let mut cs = Vec::new();
    let mut rows = Vec::new();
    let mut dt = 0.0;
    for n in [256, 512] {
        let g = Grid::d1(n, 8.0);
        let w = GridFunction::from_fn(g, Exterior::Zero, |x| (-(x[0] - 0.5).powi(2)).exp());
        let p = GridFunction::from_fn(g, Exterior::Zero, |x| (-(x[0] + 0.5).powi(2) * 2.0).exp() * (1.0 + x[0]));
        if dt == 0.0 {
            dt = 0.5 * solver::stability_bound(&k, g, Exterior::Zero, 0.0, 1.0, &PlanOptions::default())?;
        } else {
            dt *= 0.5;
        }
        let rep = verify_transport_duality(&k, &w, &p, 1.0, dt)?;
        let c = rep.residual / (rep.dt + rep.h);
        cs.push(c);
        rows.push(json!({"n": n, "report": rep, "constant": c}));
    }
    let pass = cs[1] <= (1.0 + REFINEMENT_TOLERANCE) * cs[0];
    Ok(outcome(9, t0, pass, format!("C = residual/(dt+h): {:.4e} -> {:.4e} under halving", cs[0], cs[1]), json!({"runs": rows}), vec![]))
}

pub const C10_NU: f64 = 0.625;

/// G ≡ 1 profile, Λ = 4, φ″ = 1 + 0.3 cos u, θ₀ = 2exp(−x²) on [−R, R].
pub fn c10_problem(n: usize, radius: f64, alpha: f64, exterior: Exterior) -> Result<NonlinearProblem> {
    let mut p = KernelParams::new(1, alpha, 0.0, 4.0);
    if alpha >= 1.0 {
        p = p.with_high_order(C10_NU, 1.0, 0.0);
    }
    let g = Kernel::translation_invariant(|_| 1.0, p)?;
    let theta0 = GridFunction::from_fn(Grid::d1(n, radius), exterior, |x| 2.0 * (-x[0] * x[0]).exp());
    Ok(NonlinearProblem {
        phi: Phi::cosine(0.3),
        g,
        lambda: 4.0,
        holder_phi: Some(PhiHolder { nu: C10_NU, seminorm: 0.3 * 2f64.powf(1.0 - C10_NU) }),
        theta0,
    })
}

pub fn criterion_10(ctx: &Context) -> Result<CriterionOutcome> {
    let t0 = Instant::now();
    let mut files = Vec::new();
    let s_grid: Vec<f64> = (0..20).map(|i| 10f64.powf(-2.0 + 3.0 * i as f64 / 19.0)).collect();
    let mut sym = 0.0f64;
    let mut cert = true;
    let mut canc = Vec::new();
    let mut cons = Vec::new();
    let mut canc_ok = true;
    for n in [128, 256] {
        let p = c10_problem(n, 4.0, 1.5, Exterior::Zero)?;
        let tr = nonlinear::solve_nonlinear(&p, 1.0, &NonlinearOptions::default())?;
        let (k, _) = nonlinear::induced_kernel(&tr, &p)?;
        let c = nonlinear::certify_induced(&k, p.theta0.grid)?;
        sym = sym.max(c.symmetry_defect);
        cert &= c.pass;
        let cp = nonlinear::verify_induced_cancellation(&tr, &p, &s_grid)?;
        canc_ok &= cp.pass && cp.c_measured <= cp.c_bound;
        if let Some(path) = ctx.file(&format!("c10_cancellation_n{n}.csv"), &mut files)? {
            cp.write_csv(&path)?;
        }
        canc.push(cp.c_measured);
    }
    // The box edge adds an O(R^{-1-α}) defect that does not refine away;
    // on [-8, 8] it sits below the discretisation error.
    for n in [256, 512] {
        let p = c10_problem(n, 8.0, 1.5, Exterior::Zero)?;
        cons.push(nonlinear::derivative_consistency(&p, 0.1, &NonlinearOptions::default())?);
    }
    canc_ok &= (canc[1] / canc[0] - 1.0).abs() <= REFINEMENT_TOLERANCE;
    let cons_ok = cons[1].constant <= (1.0 + REFINEMENT_TOLERANCE) * cons[0].constant;
    let p = c10_problem(256, 4.0, 1.5, Exterior::Zero)?;
    let red = nonlinear::verify_linear_reduction(&p.g, &p.theta0, 0.5)?;
    let pc = c10_problem(256, 4.0, 0.5, Exterior::Constant)?;
    let mono = nonlinear::solve_nonlinear(&pc, 1.0, &NonlinearOptions::default())?.grad_monotone_defect;
    let pass = sym <= 1e-12 && cert && canc_ok && cons_ok && red.pass && mono <= 1e-12;
    let summary = format!(
        "symmetry {sym:.1e}; certified {cert}; cancellation C {:.4} -> {:.4}; consistency C {:.2e} -> {:.2e}; reduction {:.1e}; grad monotone defect {mono:.1e}",
        canc[0], canc[1], cons[0].constant, cons[1].constant, red.max_abs_diff
    );
    let data = json!({"symmetry_defect": sym, "certified": cert, "cancellation": canc, "consistency": cons, "reduction": red, "grad_monotone_defect": mono});
    Ok(outcome(10, t0, pass, summary, data, files))
}

fn failed(id: u8, t0: Instant, e: impl std::fmt::Display) -> CriterionOutcome {
    outcome(id, t0, false, format!("error: {e}"), json!({"error": e.to_string()}), vec![])
}

/// Runs one criterion; 6 to 8 calibrate on their own.
pub fn run_one(id: u8, ctx: &Context) -> CriterionOutcome {
    let t0 = Instant::now();
    let r = match id {
        1 => criterion_1(ctx),
        2 => criterion_2(ctx),
        3 => criterion_3(ctx),
        4 => criterion_4(ctx),
        5 => criterion_5(ctx),
        6 => calibration(ctx).and_then(|c| criterion_6(ctx, &c)),
        7 => calibration(ctx).and_then(|c| criterion_7(ctx, &c)),
        8 => calibration(ctx).and_then(|c| criterion_8(ctx, c.constants.beta)),
        9 => criterion_9(ctx),
        10 => criterion_10(ctx),
        _ => Err(crate::error::Error::Config { path: "criterion".into(), msg: format!("{id} is not in 1..=10") }),
    };
    let mut o = r.unwrap_or_else(|e| failed(id, t0, e));
    o.elapsed = t0.elapsed().as_secs_f64();
    o
}

/// All ten, sharing one calibration between 6, 7 and 8.
pub fn run_all(ctx: &Context, mut report: impl FnMut(&CriterionOutcome)) -> Vec<CriterionOutcome> {
    let mut out = Vec::new();
    let mut push = |o: CriterionOutcome, out: &mut Vec<CriterionOutcome>| {
        report(&o);
        out.push(o);
    };
    for id in 1..=5 {
        push(run_one(id, ctx), &mut out);
    }
    let t0 = Instant::now();
    match calibration(ctx) {
        Ok(cal) => {
            let shared = t0.elapsed().as_secs_f64();
            for (id, r) in [(6, criterion_6(ctx, &cal)), (7, criterion_7(ctx, &cal)), (8, criterion_8(ctx, cal.constants.beta))] {
                let t = Instant::now();
                let mut o = r.unwrap_or_else(|e| failed(id, t, e));
                if id == 6 {
                    o.elapsed += shared;
                }
                push(o, &mut out);
            }
        }
        Err(e) => {
            for id in 6..=8 {
                push(failed(id, t0, format!("calibration: {e}")), &mut out);
            }
        }
    }
    for id in 9..=10 {
        push(run_one(id, ctx), &mut out);
    }
    out
}
