//! The nonlinear equation ∂ₜθ(x) = ∫ φ′(θ(y) − θ(x)) G(y − x) dy, the linear
//! kernel it induces on directional derivatives, and checks of the
//! hypotheses that kernel has to satisfy.

use crate::error::{domain, Error, Result};
use crate::estimates::{DecayReport, Law, EnvelopeRow, FLATNESS_TOLERANCE};
use crate::exec;
use crate::expr::Expr;
use crate::grid::{fmt, Exterior, Grid, GridFunction};
use crate::kernels::{check_conditions, sphere_moment, ConditionReport, Kernel, KernelFlags, SamplingPlan};
use crate::nonlocal_op::{OperatorPlan, PlanOptions};
use crate::quad::sphere_area;
use crate::solver::{self, Dt, SolveOptions, Verdict};
use crate::testclass::holder_seminorm;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An even C² function given with its first two derivatives.
#[derive(Clone)]
pub struct Phi {
    pub name: String,
    f: Scalar,
    d1: Scalar,
    d2: Scalar,
}

impl std::fmt::Debug for Phi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Phi").field("name", &self.name).finish()
    }
}

impl Phi {
    pub fn new<F, D1, D2>(name: &str, f: F, d1: D1, d2: D2) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Phi { name: name.into(), f: Arc::new(f), d1: Arc::new(d1), d2: Arc::new(d2) }
    }

    /// (φ, φ′, φ″) as expressions in `u`.
    pub fn from_exprs(phi: &str, d1: &str, d2: &str) -> Result<Self> {
        let (a, b, c) = (Expr::parse(phi)?, Expr::parse(d1)?, Expr::parse(d2)?);
        Ok(Phi::new(phi, move |u| a.eval_u(u), move |u| b.eval_u(u), move |u| c.eval_u(u)))
    }

    /// u²/2: the linear equation.
    pub fn quadratic() -> Self {
        Phi::new("u^2/2", |u| 0.5 * u * u, |u| u, |_| 1.0)
    }

    /// u²/2 + a(1 − cos u), φ″ = 1 + a cos u.
    pub fn cosine(a: f64) -> Self {
        Phi::new(&format!("u^2/2 + {a}(1 - cos u)"), move |u| 0.5 * u * u + a * (1.0 - u.cos()), move |u| u + a * u.sin(), move |u| 1.0 + a * u.cos())
    }

    /// φ″ = 1 + b tanh²u, φ = (1+b)u²/2 − b ln cosh u.
    pub fn tanh_squared(b: f64) -> Self {
        Phi::new(
            &format!("phi'' = 1 + {b} tanh(u)^2"),
            move |u| (1.0 + b) * 0.5 * u * u - b * log_cosh(u),
            move |u| (1.0 + b) * u - b * u.tanh(),
            move |u| 1.0 + b * u.tanh().powi(2),
        )
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    #[inline]
    pub fn d1(&self, u: f64) -> f64 {
        (self.d1)(u)
    }

    #[inline]
    pub fn d2(&self, u: f64) -> f64 {
        (self.d2)(u)
    }

    /// Samples φ on 64 points of [−u_max, u_max] (and a finer sweep for the
    /// φ″ range).
    pub fn check(&self, lambda: f64, u_max: f64) -> PhiReport {
        let pts: Vec<f64> = (0..64).map(|i| -u_max + 2.0 * u_max * (i as f64 + 0.5) / 64.0).collect();
        let mut even = self.value(0.0).abs();
        let mut fd = 0.0f64;
        for &u in &pts {
            even = even.max((self.value(u) - self.value(-u)).abs() / (1.0 + self.value(u).abs()));
            let e = 1e-4 * (1.0 + u.abs());
            let d1 = (self.value(u + e) - self.value(u - e)) / (2.0 * e);
            let d2 = (self.d1(u + e) - self.d1(u - e)) / (2.0 * e);
            fd = fd.max((d1 - self.d1(u)).abs() / self.d1(u).abs().max(1.0));
            fd = fd.max((d2 - self.d2(u)).abs() / self.d2(u).abs().max(1.0));
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=1024 {
            let v = self.d2(-u_max + 2.0 * u_max * i as f64 / 1024.0);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let s = lambda.sqrt();
        PhiReport {
            u_max,
            even_defect: even,
            derivative_defect: fd,
            d2_min: lo,
            d2_max: hi,
            pass: even <= 1e-12 && fd <= 1e-5 && lo >= 1.0 / s && hi <= s,
        }
    }
}

fn log_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhiReport {
    pub u_max: f64,
    pub even_defect: f64,
    /// Finite-difference mismatch of the supplied φ′, φ″ (relative).
    pub derivative_defect: f64,
    pub d2_min: f64,
    pub d2_max: f64,
    pub pass: bool,
}

/// [φ″]_{C^ν} bound.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhiHolder {
    pub nu: f64,
    pub seminorm: f64,
}

#[derive(Clone, Debug)]
pub struct NonlinearProblem {
    pub phi: Phi,
    /// G as a kernel: k(z) = G(z)|z|^{N+α}; its λ field is ignored.
    pub g: Kernel,
    pub lambda: f64,
    pub holder_phi: Option<PhiHolder>,
    pub theta0: GridFunction,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProblemReport {
    pub phi: PhiReport,
    pub g_symmetry_defect: f64,
    pub g_lower_margin: f64,
    pub g_upper_margin: f64,
    pub pass: bool,
}

impl NonlinearProblem {
    /// Oscillation of θ₀ including the exterior value; differences of θ
    /// stay inside [−osc, osc] by the maximum principle.
    pub fn oscillation(&self) -> f64 {
        let (mut lo, mut hi) = (self.theta0.min(), self.theta0.max());
        if self.theta0.exterior == Exterior::Zero {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        hi - lo
    }

    /// M = [φ″]_ν ‖∇θ₀‖_∞^ν
    pub fn m_constant(&self) -> Option<f64> {
        self.holder_phi.map(|h| h.seminorm * grad_linf(&self.theta0).powf(h.nu))
    }

    pub fn validate(&self) -> Result<ProblemReport> {
        if self.theta0.grid.n_dim != self.g.dim() {
            return Err(Error::Shape(format!("theta0 is {}-dimensional, G is {}-dimensional", self.theta0.grid.n_dim, self.g.dim())));
        }
        crate::nonlocal_op::check_finite_values(&self.theta0)?;
        let phi = self.phi.check(self.lambda, self.oscillation().max(1e-3));
        let p = self.g.params;
        let s = self.lambda.sqrt();
        let n = p.n;
        let (mut sym, mut lo, mut up) = (0.0f64, f64::INFINITY, f64::INFINITY);
        for i in 0..=48 {
            let r = 10f64.powf(-3.0 + 6.0 * i as f64 / 48.0);
            let dirs: Vec<[f64; 2]> = if n == 1 { vec![[1.0, 0.0]] } else { (0..8).map(|j| { let th = std::f64::consts::PI * j as f64 / 8.0; [th.cos(), th.sin()] }).collect() };
            for d in dirs {
                let z = [r * d[0], r * d[1]];
                let m = [-z[0], -z[1]];
                let a = self.g.eval(0.0, &[0.0, 0.0][..n], &z[..n]);
                let b = self.g.eval(0.0, &[0.0, 0.0][..n], &m[..n]);
                sym = sym.max((a - b).abs());
                if p.zeta.covers(r) {
                    lo = lo.min(a - 1.0 / s);
                }
                up = up.min(s * (1.0 + r.powf(p.omega)) - a);
            }
        }
        let pass = phi.pass && sym <= 1e-12 && lo >= 0.0 && up >= 0.0;
        Ok(ProblemReport { phi, g_symmetry_defect: sym, g_lower_margin: lo, g_upper_margin: up, pass })
    }
}

fn grad_linf(f: &GridFunction) -> f64 {
    (0..f.grid.n_dim).map(|a| f.gradient(a).iter().fold(0.0f64, |m, v| m.max(v.abs()))).fold(0.0, f64::max)
}

/// D_e θ along axis `axis` as a grid function with the zero exterior rule.
pub fn directional_derivative(theta: &GridFunction, axis: usize) -> GridFunction {
    let mut d = GridFunction::new(theta.grid, theta.gradient(axis), Exterior::Zero).expect("same grid");
    d.time = theta.time;
    d
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradientNorms {
    pub t: f64,
    pub linf: f64,
    pub grad_linf: f64,
    pub grad_l1: f64,
    /// [∂₁θ]_{C^β} when requested.
    pub grad_holder: Option<f64>,
    /// ½∬ φ(θ(y) − θ(x)) G(y − x): informational.
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct NonlinearOptions {
    pub dt: Dt,
    /// Upper bound on stored frames (first and last always kept).
    pub max_frames: usize,
    pub plan: PlanOptions,
    pub holder_beta: Option<f64>,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        NonlinearOptions { dt: Dt::Auto, max_frames: 512, plan: PlanOptions::pairwise(), holder_beta: None }
    }
}

#[derive(Clone, Debug)]
pub struct NonlinearTrajectory {
    pub frames: Vec<GridFunction>,
    pub dt: f64,
    pub steps: usize,
    pub stability_bound: f64,
    pub norms: Vec<GradientNorms>,
    /// max over steps of ‖∇θ(t_{n+1})‖_∞ − ‖∇θ(t_n)‖_∞ (positive = growth)
    pub grad_monotone_defect: f64,
}

impl NonlinearTrajectory {
    pub fn last(&self) -> &GridFunction {
        self.frames.last().expect("trajectory has frames")
    }

    /// θ(t, ·) by linear interpolation between stored frames.
    pub fn at(&self, t: f64) -> Result<GridFunction> {
        let (a, b, w) = self.bracket(t)?;
        let fa = &self.frames[a];
        let fb = &self.frames[b];
        let mut out = fa.with_values(fa.values.iter().zip(&fb.values).map(|(x, y)| (1.0 - w) * x + w * y).collect());
        out.time = t;
        Ok(out)
    }

    fn bracket(&self, t: f64) -> Result<(usize, usize, f64)> {
        let t0 = self.frames[0].time;
        let t1 = self.last().time;
        let eps = 1e-12 * (1.0 + t1.abs());
        if !(t >= t0 - eps && t <= t1 + eps) {
            return Err(Error::Range(format!("t = {t} outside the stored range [{t0}, {t1}]")));
        }
        let b = self.frames.partition_point(|f| f.time < t).clamp(1, self.frames.len() - 1);
        let a = b - 1;
        let (ta, tb) = (self.frames[a].time, self.frames[b].time);
        let w = if tb > ta { ((t - ta) / (tb - ta)).clamp(0.0, 1.0) } else { 0.0 };
        Ok((a, b, w))
    }

    /// Columns t, linf, grad_linf, grad_l1, grad_holder, energy.
    pub fn write_norms_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "linf", "grad_linf", "grad_l1", "grad_holder", "energy"])?;
        for r in &self.norms {
            w.write_record([fmt(r.t), fmt(r.linf), fmt(r.grad_linf), fmt(r.grad_l1), r.grad_holder.map(fmt).unwrap_or_default(), fmt(r.energy)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn gradient_norms(plan: &OperatorPlan, phi: &Phi, f: &GridFunction, beta: Option<f64>) -> GradientNorms {
    let nd = f.grid.n_dim;
    let cell = f.grid.cell_volume();
    let grads: Vec<Vec<f64>> = (0..nd).map(|a| f.gradient(a)).collect();
    let mut gl = 0.0f64;
    let mut g1 = 0.0;
    for i in 0..f.grid.len() {
        let m = grads.iter().map(|g| g[i] * g[i]).sum::<f64>().sqrt();
        gl = gl.max(m);
        g1 += m * cell;
    }
    let mut e = vec![0.0; f.grid.len()];
    plan.accumulate(&f.values, |a, b| phi.value(b - a), &mut e);
    GradientNorms {
        t: f.time,
        linf: f.linf(),
        grad_linf: gl,
        grad_l1: g1,
        grad_holder: beta.map(|b| holder_seminorm(&directional_derivative(f, 0), b)),
        energy: 0.5 * exec::psum(&e) * cell,
    }
}

/// Explicit Euler for the nonlinear equation. With φ′(u) = u the update is
/// bitwise the linear solver's update on the same plan.
pub fn solve_nonlinear(problem: &NonlinearProblem, t_end: f64, opts: &NonlinearOptions) -> Result<NonlinearTrajectory> {
    crate::nonlocal_op::check_finite_values(&problem.theta0)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(domain("t_end", format!("{t_end} must be finite and >= 0")));
    }
    let th0 = &problem.theta0;
    let grid = th0.grid;
    let g = &problem.g;
    if !g.flags.time_independent {
        return Err(Error::Unsupported("G must be time independent".into()));
    }
    let plan = OperatorPlan::build(g, grid, 0.0, th0.exterior, &opts.plan)?;
    let osc = problem.oscillation();
    let sup_d2 = (0..=1024).map(|i| problem.phi.d2(-osc + 2.0 * osc * i as f64 / 1024.0)).fold(0.0, f64::max);
    let bound = 0.5 / (sup_d2 * plan.max_row_sum());
    let dt_req = match opts.dt {
        Dt::Auto => 0.9 * bound,
        Dt::Fixed(d) => d,
    };
    let (steps, dt) = solver::step_count(t_end, dt_req);
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, bound });
    }
    let stride = steps.div_ceil(opts.max_frames.max(2) - 1).max(1);
    let phi = &problem.phi;
    let t_start = th0.time;
    let mut w = th0.clone();
    let mut frames = vec![w.clone()];
    let mut rhs = vec![0.0; grid.len()];
    let mut gprev = grad_linf(&w);
    let mut defect = f64::NEG_INFINITY;
    for step in 0..steps {
        let t = t_start + step as f64 * dt;
        plan.accumulate(&w.values, |a, b| -phi.d1(b - a), &mut rhs);
        let prev = std::mem::take(&mut w.values);
        let mut next = vec![0.0; prev.len()];
        exec::fill(&mut next, |i| prev[i] - dt * rhs[i]);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: step + 1, t: t + dt });
        }
        w.values = next;
        w.time = if step + 1 == steps { t_start + t_end } else { t + dt };
        let gl = grad_linf(&w);
        defect = defect.max(gl - gprev);
        gprev = gl;
        if (step + 1) % stride == 0 || step + 1 == steps {
            frames.push(w.clone());
        }
    }
    let norms = exec::map(frames.len(), |k| gradient_norms(&plan, phi, &frames[k], opts.holder_beta));
    Ok(NonlinearTrajectory { frames, dt, steps, stability_bound: bound, norms, grad_monotone_defect: defect.max(0.0) })
}

/// k(t, x, z) = φ″(θ(t, x+z) − θ(t, x))·g(z), θ interpolated linearly in t
/// between stored frames and multilinearly in space.
#[derive(Clone)]
pub struct InducedKernel {
    traj: Arc<NonlinearTrajectory>,
    phi: Phi,
    g: Kernel,
}

impl InducedKernel {
    pub fn eval(&self, t: f64, x: &[f64], z: &[f64]) -> Result<f64> {
        let (a, b, w) = self.traj.bracket(t)?;
        Ok(self.eval_bracket(a, b, w, t, x, z))
    }

    fn theta(&self, a: usize, b: usize, w: f64, x: &[f64]) -> f64 {
        let fa = &self.traj.frames[a];
        let fb = &self.traj.frames[b];
        (1.0 - w) * fa.interpolate(x) + w * fb.interpolate(x)
    }

    fn eval_bracket(&self, a: usize, b: usize, w: f64, t: f64, x: &[f64], z: &[f64]) -> f64 {
        let mut y = [0.0; 2];
        for i in 0..x.len() {
            y[i] = x[i] + z[i];
        }
        let d = self.theta(a, b, w, &y[..x.len()]) - self.theta(a, b, w, x);
        self.phi.d2(d) * self.g.eval(t, x, z)
    }
}

/// The induced kernel as a [`Kernel`] with Λ the problem's Λ and, for
/// α ≥ 1, ν from the φ″ bound, s₀ = 1 and τ = 2^ν|S^{N−1}|/2·M·√Λ. Outside
/// the stored time range it evaluates to NaN; use [`InducedKernel::eval`]
/// for a checked evaluation.
pub fn induced_kernel(traj: &NonlinearTrajectory, problem: &NonlinearProblem) -> Result<(Kernel, InducedKernel)> {
    let ik = InducedKernel { traj: Arc::new(traj.clone()), phi: problem.phi.clone(), g: problem.g.clone() };
    let gp = problem.g.params;
    let mut params = gp;
    params.lambda = problem.lambda;
    if gp.alpha >= 1.0 {
        let h = problem.holder_phi.ok_or_else(|| Error::Precondition("alpha >= 1 needs the Hölder bound of phi''".into()))?;
        let m = problem.m_constant().unwrap_or(0.0);
        params = params.with_high_order(h.nu, 1.0, cancellation_constant_bound(gp.n, h.nu) * m * problem.lambda.sqrt());
        params.gamma = params.gamma_midpoint();
    }
    let t_max = traj.last().time;
    let k2 = ik.clone();
    let flags = KernelFlags { translation_invariant: false, time_independent: false, smooth: false };
    let kernel = Kernel::custom("induced", params, flags, move |t, x, z| k2.eval(t, x, z).unwrap_or(f64::NAN))?.with_t_max(t_max);
    Ok((kernel, ik))
}

/// 2^ν|S^{N−1}|/2: pairing σ with −σ and using |Δ(σ) + Δ(−σ)| ≤ 2s‖∇θ‖_∞.
pub fn cancellation_constant_bound(n: usize, nu: f64) -> f64 {
    2f64.powf(nu) * sphere_area(n) / 2.0
}

#[derive(Clone, Debug, Serialize)]
pub struct InducedCertificate {
    pub conditions: ConditionReport,
    /// max |k(t,x,z) − k(t,x+z,−z)| over the sampled points
    pub symmetry_defect: f64,
    pub pass: bool,
}

/// Symmetry to 1e−12 and the bounds/cancellation conditions on the sampling
/// plan for the box.
pub fn certify_induced(kernel: &Kernel, grid: Grid) -> Result<InducedCertificate> {
    let plan = SamplingPlan::default_for(grid.n_dim, grid.radius, grid.h(), kernel.t_max);
    let conditions = check_conditions(kernel, &plan)?;
    let symmetry_defect = conditions.symmetry_max_defect;
    let pass = conditions.pass() && symmetry_defect <= 1e-12;
    Ok(InducedCertificate { conditions, symmetry_defect, pass })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CancellationRowN {
    pub s: f64,
    /// max over sampled (t, x) of |∫ k(t,x,sσ) σ dσ|
    pub profile: f64,
    /// C_bound·M·√Λ·s^ν
    pub bound: f64,
    /// τ̄ s^ν(1 + s^ω) for s ≥ 1
    pub extended_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CancellationProfile {
    pub rows: Vec<CancellationRowN>,
    pub m: f64,
    pub nu: f64,
    pub sqrt_lambda: f64,
    /// max_s profile / (M√Λ s^ν) over s < 1
    pub c_measured: f64,
    pub c_bound: f64,
    pub pass: bool,
}

impl CancellationProfile {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["s", "profile", "bound", "extended_bound"])?;
        for r in &self.rows {
            w.write_record([r.s, r.profile, r.bound, r.extended_bound].map(fmt))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// |∫_{S^{N−1}} k(t,x,sσ)σ dσ| for s in `s_grid`, maximised over 8 times and
/// the interior grid points of a 32-point subsample.
pub fn verify_induced_cancellation(traj: &NonlinearTrajectory, problem: &NonlinearProblem, s_grid: &[f64]) -> Result<CancellationProfile> {
    let h = problem.holder_phi.ok_or_else(|| Error::Precondition("the cancellation check needs the Hölder bound of phi''".into()))?;
    let (kernel, _) = induced_kernel(traj, problem)?;
    let m = problem.m_constant().unwrap_or(0.0);
    let sl = problem.lambda.sqrt();
    let p = problem.g.params;
    let grid = problem.theta0.grid;
    let t1 = traj.last().time;
    let times: Vec<f64> = (0..8).map(|i| t1 * i as f64 / 7.0).collect();
    let nd = grid.n_dim;
    let stride = (grid.len() / 32).max(1);
    let xs: Vec<Vec<f64>> = (0..grid.len()).step_by(stride).filter(|&i| grid.inside(i, 0.5)).map(|i| grid.point(i)[..nd].to_vec()).collect();
    let c_bound = cancellation_constant_bound(p.n, h.nu);
    let profile: Vec<f64> = exec::map(s_grid.len(), |k| {
        let s = s_grid[k];
        let mut best = 0.0f64;
        for &t in &times {
            for x in &xs {
                let v = sphere_moment(&kernel, t, x, s, 64);
                best = best.max(v.iter().map(|a| a * a).sum::<f64>().sqrt());
            }
        }
        best
    });
    let mut c = 0.0f64;
    let mut pass = true;
    let rows: Vec<CancellationRowN> = s_grid
        .iter()
        .zip(&profile)
        .map(|(&s, &v)| {
            let bound = c_bound * m * sl * s.powf(h.nu);
            let ext = bound * (1.0 + s.powf(p.omega));
            if s < 1.0 {
                if m > 0.0 {
                    c = c.max(v / (m * sl * s.powf(h.nu)));
                }
                pass &= v <= bound * (1.0 + 1e-9) + 1e-14;
            } else {
                pass &= v <= ext * (1.0 + 1e-9) + 1e-14;
            }
            CancellationRowN { s, profile: v, bound, extended_bound: ext }
        })
        .collect();
    Ok(CancellationProfile { rows, m, nu: h.nu, sqrt_lambda: sl, c_measured: c, c_bound, pass })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub t_end: f64,
    pub dt: f64,
    pub h: f64,
    /// max over stored frames of ‖w(t) − D₁θ(t)‖_∞ on the inner half of the
    /// box, over ‖D₁θ₀‖_∞. Near the box edge θ jumps to the exterior value and
    /// D₁θ is not a solution there.
    pub max_error: f64,
    /// max_error / (dt + h)
    pub constant: f64,
}

/// Solves the linear equation with the induced kernel from D₁θ₀ and compares
/// with D₁θ(t) at the stored frames, away from the box edge.
pub fn derivative_consistency(problem: &NonlinearProblem, t_end: f64, opts: &NonlinearOptions) -> Result<ConsistencyReport> {
    let traj = solve_nonlinear(problem, t_end, opts)?;
    let (kernel, _) = induced_kernel(&traj, problem)?;
    let w0 = directional_derivative(&problem.theta0, 0);
    let scale = w0.linf().max(f64::MIN_POSITIVE);
    let stride = traj.steps.div_ceil(traj.frames.len().max(2) - 1).max(1);
    let lin = solver::solve_with(
        &kernel,
        &w0,
        t_end,
        &SolveOptions { dt: Dt::Fixed(traj.dt), snapshot_stride: stride, plan: opts.plan, ..SolveOptions::default() },
    )?;
    let mut err = 0.0f64;
    for f in &lin.frames {
        let th = traj.at(f.time)?;
        let d = directional_derivative(&th, 0);
        let g = f.grid;
        let e = (0..g.len()).filter(|&i| g.inside(i, 0.5)).fold(0.0f64, |m, i| m.max((f.values[i] - d.values[i]).abs()));
        err = err.max(e / scale);
    }
    let h = problem.theta0.grid.h();
    Ok(ConsistencyReport { t_end, dt: traj.dt, h, max_error: err, constant: err / (traj.dt + h) })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionReport {
    pub max_abs_diff: f64,
    pub steps: usize,
    pub pass: bool,
}

/// With φ″ ≡ 1 the nonlinear march must reproduce the linear solver.
pub fn verify_linear_reduction(g: &Kernel, theta0: &GridFunction, t_end: f64) -> Result<ReductionReport> {
    let problem = NonlinearProblem { phi: Phi::quadratic(), g: g.clone(), lambda: g.params.lambda, holder_phi: None, theta0: theta0.clone() };
    let opts = NonlinearOptions::default();
    let nl = solve_nonlinear(&problem, t_end, &opts)?;
    let stride = nl.steps.div_ceil(nl.frames.len().max(2) - 1).max(1);
    let lin = solver::solve_with(g, theta0, t_end, &SolveOptions { dt: Dt::Fixed(nl.dt), snapshot_stride: stride, plan: opts.plan, ..SolveOptions::default() })?;
    if lin.frames.len() != nl.frames.len() {
        return Err(Error::Shape(format!("{} linear frames vs {} nonlinear", lin.frames.len(), nl.frames.len())));
    }
    let d = lin
        .frames
        .iter()
        .zip(&nl.frames)
        .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    Ok(ReductionReport { max_abs_diff: d, steps: nl.steps, pass: d <= 1e-12 })
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientReport {
    pub persistence: DecayReport,
    pub certificate_pass: bool,
    /// sup_t [D₁θ(t)]_β / (max{1, t^{−β/α}}‖D₁θ₀‖_∞)
    pub smoothing_constant: f64,
    /// sup_t ‖D₁θ(t)‖_{C^β} / (‖D₁θ₀‖_∞ + max{1, t^{−(N+β)/α}}‖D₁θ₀‖₁)
    pub l1_smoothing_constant: f64,
    pub grad_monotone_defect: f64,
}

/// Persistence of ‖D₁θ(t)‖_{C^β} across horizons, after certifying the
/// induced kernel on the longest run.
pub fn gradient_persistence_experiment(problem: &NonlinearProblem, horizons: &[f64], beta: f64, opts: &NonlinearOptions) -> Result<GradientReport> {
    let t_max = horizons.iter().cloned().fold(0.0, f64::max);
    let o = NonlinearOptions { holder_beta: None, ..opts.clone() };
    let traj = solve_nonlinear(problem, t_max, &o)?;
    let (kernel, _) = induced_kernel(&traj, problem)?;
    let cert = certify_induced(&kernel, problem.theta0.grid)?;
    if !cert.pass {
        return Err(Error::Precondition(format!(
            "induced kernel fails its conditions: {}",
            serde_json::to_string(&cert.conditions).unwrap_or_default()
        )));
    }
    let d0 = directional_derivative(&problem.theta0, 0);
    let (m0, l10) = (d0.linf(), d0.l1());
    let n0 = m0 + holder_seminorm(&d0, beta);
    let p = problem.g.params;
    let vals: Vec<(f64, f64, f64)> = exec::map(traj.frames.len(), |k| {
        let d = directional_derivative(&traj.frames[k], 0);
        let s = holder_seminorm(&d, beta);
        (traj.frames[k].time, d.linf() + s, s)
    });
    let series: Vec<EnvelopeRow> = vals.iter().map(|&(t, v, _)| EnvelopeRow { t, lhs: v, rhs: n0 }).collect();
    let mut hs: Vec<(f64, f64)> = horizons
        .iter()
        .map(|&t| (t, series.iter().filter(|r| r.t <= t + 0.5 * traj.dt).map(|r| r.lhs / r.rhs).fold(0.0, f64::max)))
        .collect();
    hs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let hi = hs.iter().map(|h| h.1).fold(0.0, f64::max);
    let lo = hs.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
    let pass = hi.is_finite() && n0 > 0.0 && hi <= lo * (1.0 + FLATNESS_TOLERANCE);
    let pos = vals.iter().filter(|v| v.0 > 0.0);
    let sm = pos.clone().map(|&(t, _, s)| s / (1f64.max(t.powf(-beta / p.alpha)) * m0)).fold(0.0, f64::max);
    let l1s = pos
        .map(|&(t, v, _)| v / (m0 + 1f64.max(t.powf(-(p.n as f64 + beta) / p.alpha)) * l10))
        .fold(0.0, f64::max);
    Ok(GradientReport {
        persistence: DecayReport {
            law: Law::Persistence,
            beta,
            measured_constant: hi,
            fitted_exponent: None,
            expected_exponent: 0.0,
            refined_constant: None,
            refinement_ratio: None,
            horizons: hs,
            series,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            pass,
            note: format!("spread {:.4} across horizons", hi / lo - 1.0),
        },
        certificate_pass: cert.pass,
        smoothing_constant: sm,
        l1_smoothing_constant: l1s,
        grad_monotone_defect: traj.grad_monotone_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelParams;

    fn unit_g(alpha: f64) -> Kernel {
        let p = KernelParams::new(1, alpha, 0.0, 4.0).with_high_order(0.625, 1.0, 0.0);
        Kernel::translation_invariant(|_| 1.0, if alpha >= 1.0 { p } else { KernelParams::new(1, alpha, 0.0, 4.0) }).unwrap()
    }

    #[test]
    fn library_phis_are_consistent() {
        for phi in [Phi::quadratic(), Phi::cosine(0.3), Phi::tanh_squared(0.4)] {
            let r = phi.check(4.0, 3.0);
            assert!(r.pass, "{} {:?}", phi.name, r);
        }
        assert!(!Phi::cosine(0.9).check(1.5, 3.0).pass);
    }

    #[test]
    fn constant_theta_is_stationary() {
        let g = Grid::d1(64, 4.0);
        let th = GridFunction::constant(g, 2.0);
        let p = NonlinearProblem { phi: Phi::cosine(0.3), g: unit_g(0.5), lambda: 4.0, holder_phi: None, theta0: th.clone() };
        let tr = solve_nonlinear(&p, 0.5, &NonlinearOptions::default()).unwrap();
        assert_eq!(tr.last().values, th.values);
    }

    #[test]
    fn quadratic_phi_reproduces_linear_solver() {
        let g = Grid::d1(128, 6.0);
        let th = GridFunction::from_fn(g, Exterior::Zero, |x| (-x[0] * x[0]).exp());
        let r = verify_linear_reduction(&unit_g(0.5), &th, 0.5).unwrap();
        assert_eq!(r.max_abs_diff, 0.0);
    }

    #[test]
    fn induced_kernel_is_symmetric_and_out_of_range_fails() {
        let g = Grid::d1(128, 6.0);
        let th = GridFunction::from_fn(g, Exterior::Zero, |x| (-x[0] * x[0]).exp());
        let p = NonlinearProblem { phi: Phi::cosine(0.3), g: unit_g(0.5), lambda: 4.0, holder_phi: None, theta0: th };
        let tr = solve_nonlinear(&p, 0.2, &NonlinearOptions::default()).unwrap();
        let (k, ik) = induced_kernel(&tr, &p).unwrap();
        for &(x, z) in &[(0.3, 0.7), (-1.0, 2.5), (0.0, -0.01)] {
            let a = k.eval(0.1, &[x], &[z]);
            let b = k.eval(0.1, &[x + z], &[-z]);
            assert!((a - b).abs() <= 1e-12, "{a} {b}");
        }
        assert!(matches!(ik.eval(0.3, &[0.0], &[1.0]), Err(Error::Range(_))));
    }
}
