//! Explicit Euler for ∂ₜw + T_t w = 0: w^{n+1} = w^n − dt·T_{t_n} w^n.
//! Under dt·max_i D_i ≤ ½ each step is a convex combination of neighbouring
//! values, which is the discrete maximum principle.

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{fmt, Exterior, Grid, GridFunction};
use crate::harness::fit::{fit_exponent, ExponentFit};
use crate::kernels::{Kernel, KernelParams};
use crate::nonlocal_op::{OperatorPlan, PlanOptions};
use crate::testclass;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dt {
    /// 0.9 × the stability bound.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub dt: Dt,
    /// Store every k-th step (first and last are always stored).
    pub snapshot_stride: usize,
    /// Skip the stability check; only for negative controls.
    #[serde(default)]
    pub unchecked: bool,
    #[serde(default)]
    pub plan: PlanOptions,
    /// Hölder exponent for the stored-frame norms; None skips it.
    #[serde(default)]
    pub holder_beta: Option<f64>,
    /// Concentration exponent for the stored-frame norms; None skips it.
    #[serde(default)]
    pub concentration_gamma: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            dt: Dt::Auto,
            snapshot_stride: 1,
            unchecked: false,
            plan: PlanOptions::default(),
            holder_beta: None,
            concentration_gamma: None,
        }
    }
}

/// Cheap norms, recorded after every step.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StepNorms {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub max: f64,
    pub min: f64,
    pub integral: f64,
}

impl StepNorms {
    pub fn of(f: &GridFunction) -> Self {
        StepNorms { t: f.time, l1: f.l1(), l2: f.l2(), linf: f.linf(), max: f.max(), min: f.min(), integral: f.integral() }
    }
}

/// Norms of a stored frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormRecord {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub holder_beta: Option<f64>,
    pub concentration: Option<f64>,
    pub center: Vec<f64>,
}

impl NormRecord {
    pub fn of(f: &GridFunction, beta: Option<f64>, gamma: Option<f64>) -> Self {
        let holder_beta = beta.map(|b| testclass::holder_seminorm(f, b));
        let (center, concentration) = match gamma {
            Some(g) => {
                let (c, v) = testclass::best_center(f, g);
                (c, Some(v))
            }
            None => (Vec::new(), None),
        };
        NormRecord { t: f.time, l1: f.l1(), l2: f.l2(), linf: f.linf(), holder_beta, concentration, center }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub frames: Vec<GridFunction>,
    pub dt: f64,
    pub kernel: Kernel,
    pub grid: Grid,
    pub exterior: Exterior,
    /// One record per stored frame.
    pub norm_series: Vec<NormRecord>,
    /// One record per step, including t = 0.
    pub step_norms: Vec<StepNorms>,
    pub stability_bound: f64,
    pub options: SolveOptions,
}

impl Trajectory {
    pub fn first(&self) -> &GridFunction {
        &self.frames[0]
    }

    pub fn last(&self) -> &GridFunction {
        self.frames.last().expect("a trajectory has at least one frame")
    }

    pub fn params(&self) -> &KernelParams {
        &self.kernel.params
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    /// Columns t, l1, l2, linf, holder_beta, concentration, center_x1...
    pub fn write_norms_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut head: Vec<String> = ["t", "l1", "l2", "linf", "holder_beta", "concentration"].iter().map(|s| s.to_string()).collect();
        head.extend((1..=self.grid.n_dim).map(|i| format!("center_x{i}")));
        w.write_record(&head)?;
        let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
        for r in &self.norm_series {
            let mut row = vec![fmt(r.t), fmt(r.l1), fmt(r.l2), fmt(r.linf), opt(r.holder_beta), opt(r.concentration)];
            for a in 0..self.grid.n_dim {
                row.push(r.center.get(a).map(|v| fmt(*v)).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns t, l1, l2, linf, max, min, integral, one row per step.
    pub fn write_steps_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "l1", "l2", "linf", "max", "min", "integral"])?;
        for s in &self.step_norms {
            w.write_record([fmt(s.t), fmt(s.l1), fmt(s.l2), fmt(s.linf), fmt(s.max), fmt(s.min), fmt(s.integral)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_frames(&self, path: &Path) -> Result<()> {
        write_frames(path, &self.frames, self.dt)
    }
}

/// 0.5 / max_i D_i over the sampled times in [t0, t1] (a single time for
/// time-independent kernels).
pub fn stability_bound(kernel: &Kernel, grid: Grid, exterior: Exterior, t0: f64, t1: f64, opts: &PlanOptions) -> Result<f64> {
    let times: Vec<f64> = if kernel.flags.time_independent || t1 <= t0 {
        vec![t0]
    } else {
        (0..=8).map(|k| t0 + (t1 - t0) * k as f64 / 8.0).collect()
    };
    let mut d = 0.0f64;
    for t in times {
        d = d.max(OperatorPlan::build(kernel, grid, t, exterior, opts)?.max_row_sum());
    }
    Ok(if d > 0.0 { 0.5 / d } else { f64::INFINITY })
}

/// Fixed step; the step is shrunk so that t_end/dt is an integer.
pub fn solve(kernel: &Kernel, w0: &GridFunction, t_end: f64, dt: f64, snapshot_stride: usize) -> Result<Trajectory> {
    let opts = SolveOptions { dt: Dt::Fixed(dt), snapshot_stride, ..SolveOptions::default() };
    solve_with(kernel, w0, t_end, &opts)
}

/// Number of steps and the uniform step covering [0, t_end] with dt ≤ requested.
pub fn step_count(t_end: f64, dt: f64) -> (usize, f64) {
    if t_end <= 0.0 {
        return (0, dt);
    }
    let steps = (t_end / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (steps, t_end / steps as f64)
}

pub fn solve_with(kernel: &Kernel, w0: &GridFunction, t_end: f64, opts: &SolveOptions) -> Result<Trajectory> {
    let stride = opts.snapshot_stride.max(1);
    march(kernel, w0, t_end, opts, &|step, _| step % stride == 0)
}

/// Like [`solve_with`] but stores only the frames at the steps nearest the
/// requested times (plus the first and last); the stride option is ignored.
pub fn solve_at(kernel: &Kernel, w0: &GridFunction, times: &[f64], opts: &SolveOptions) -> Result<Trajectory> {
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    march(kernel, w0, t_end, opts, &|step, dt| {
        times.iter().any(|&s| (s / dt).round() as usize == step)
    })
}

fn march(kernel: &Kernel, w0: &GridFunction, t_end: f64, opts: &SolveOptions, keep: &dyn Fn(usize, f64) -> bool) -> Result<Trajectory> {
    crate::nonlocal_op::check_finite_values(w0)?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(crate::error::domain("t_end", format!("{t_end} must be finite and >= 0")));
    }
    let grid = w0.grid;
    let ext = w0.exterior;
    let t_start = w0.time;
    let bound = stability_bound(kernel, grid, ext, t_start, t_start + t_end, &opts.plan)?;
    let dt_req = match opts.dt {
        Dt::Auto => 0.9 * bound,
        Dt::Fixed(d) => d,
    };
    if !(dt_req > 0.0 && dt_req.is_finite()) {
        return Err(crate::error::domain("dt", format!("step {dt_req} must be positive and finite")));
    }
    let (steps, dt) = step_count(t_end, dt_req);
    if !opts.unchecked && dt > bound * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, bound });
    }
    let mut w = w0.clone();
    let mut frames = vec![w.clone()];
    let mut step_norms = vec![StepNorms::of(&w)];
    let mut plan = OperatorPlan::build(kernel, grid, t_start, ext, &opts.plan)?;
    let mut tw = vec![0.0; grid.len()];
    for step in 0..steps {
        let t = t_start + step as f64 * dt;
        if !kernel.flags.time_independent && step > 0 {
            plan = OperatorPlan::build(kernel, grid, t, ext, &opts.plan)?;
        }
        if !opts.unchecked && dt * plan.max_row_sum() > 0.5 * (1.0 + 1e-12) {
            return Err(Error::Stability { dt, bound: 0.5 / plan.max_row_sum() });
        }
        plan.apply_values(&w.values, &mut tw);
        let prev = std::mem::take(&mut w.values);
        let mut next = vec![0.0; prev.len()];
        exec::fill(&mut next, |i| prev[i] - dt * tw[i]);
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            let _ = i;
            return Err(Error::NonFinite { step: step + 1, t: t + dt });
        }
        w.values = next;
        w.time = if step + 1 == steps { t_start + t_end } else { t + dt };
        step_norms.push(StepNorms::of(&w));
        if keep(step + 1, dt) || step + 1 == steps {
            frames.push(w.clone());
        }
    }
    let norm_series: Vec<NormRecord> =
        frames.iter().map(|f| NormRecord::of(f, opts.holder_beta, opts.concentration_gamma)).collect();
    Ok(Trajectory {
        frames,
        dt,
        kernel: kernel.clone(),
        grid,
        exterior: ext,
        norm_series,
        step_norms,
        stability_bound: bound,
        options: opts.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lp {
    One,
    Two,
    Inf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpReport {
    pub p: Lp,
    /// max_n (‖w^{n+1}‖_p − ‖w^n‖_p)⁺ / (1 + ‖w^n‖_p)
    pub max_defect: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// L^p monotonicity over every step. Tolerance 1e−10 for p = ∞ and
/// 10(dt + h^{min(α,1)})‖w₀‖_p for p ∈ {1, 2}.
pub fn verify_lp_monotone(traj: &Trajectory, p: Lp) -> LpReport {
    let norm = |s: &StepNorms| match p {
        Lp::One => s.l1,
        Lp::Two => s.l2,
        Lp::Inf => s.linf,
    };
    let mut max_defect = 0.0f64;
    for w in traj.step_norms.windows(2) {
        let (a, b) = (norm(&w[0]), norm(&w[1]));
        max_defect = max_defect.max((b - a).max(0.0) / (1.0 + a));
    }
    let alpha = traj.kernel.params.alpha;
    let tolerance = match p {
        Lp::Inf => 1e-10,
        _ => 10.0 * (traj.dt + traj.h().powf(alpha.min(1.0))) * norm(&traj.step_norms[0]),
    };
    LpReport { p, max_defect, tolerance, pass: max_defect <= tolerance }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    /// max_n of the excess of max w^{n+1} over max w^n (and of min w^n over
    /// min w^{n+1}) relative to 1 + ‖w^n‖_∞. The zero exterior rule adds 0 to
    /// the values being combined.
    pub max_excess: f64,
    pub pass: bool,
}

pub fn verify_max_principle(traj: &Trajectory) -> MaxPrincipleReport {
    let zero = traj.exterior == Exterior::Zero;
    let mut excess = 0.0f64;
    for w in traj.step_norms.windows(2) {
        let (mut hi, mut lo) = (w[0].max, w[0].min);
        if zero {
            hi = hi.max(0.0);
            lo = lo.min(0.0);
        }
        let e = (w[1].max - hi).max(lo - w[1].min).max(0.0) / (1.0 + w[0].linf);
        excess = excess.max(e);
    }
    MaxPrincipleReport { max_excess: excess, pass: excess <= 1e-12 }
}

/// A convex C² function with its second derivative.
pub struct Eta {
    pub name: String,
    pub f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub d2: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Eta {
    pub fn square() -> Self {
        Eta { name: "u^2".into(), f: Box::new(|u| u * u), d2: Box::new(|_| 2.0) }
    }

    pub fn identity() -> Self {
        Eta { name: "u".into(), f: Box::new(|u| u), d2: Box::new(|_| 0.0) }
    }

    /// √(u² + ε²)
    pub fn smoothed_abs(eps: f64) -> Self {
        Eta {
            name: format!("sqrt(u^2+{eps:e}^2)"),
            f: Box::new(move |u| (u * u + eps * eps).sqrt()),
            d2: Box::new(move |u| eps * eps / (u * u + eps * eps).powf(1.5)),
        }
    }

    /// Default smoothing ε = 1e−6·(1 + ‖w‖_∞).
    pub fn smoothed_abs_for(linf: f64) -> Self {
        Eta::smoothed_abs(1e-6 * (1.0 + linf))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub eta: String,
    /// max over interior points and frame midpoints of ∂ₜη(w) + T(η(w))
    pub max_d: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub pairs: usize,
}

/// D = ∂ₜη(w) + T_t(η(w)) at midpoints of consecutive stored frames and
/// interior points (inner 90% of the box). The time derivative is the
/// centred difference over the frame spacing and T(η(w)) the average of
/// both ends. T is applied to η(w) − η(0) so that the zero exterior rule
/// continues η(w) by η(0).
pub fn verify_convexity_inequality(traj: &Trajectory, eta: &Eta) -> Result<ConvexityReport> {
    let lo = traj.step_norms.iter().map(|s| s.min).fold(f64::INFINITY, f64::min).min(0.0);
    let hi = traj.step_norms.iter().map(|s| s.max).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    for k in 0..=100 {
        let u = lo + (hi - lo) * k as f64 / 100.0;
        if (eta.d2)(u) < 0.0 {
            return Err(Error::Precondition(format!("eta is not convex: eta''({u}) < 0")));
        }
    }
    let grid = traj.grid;
    let ext = traj.exterior;
    let kernel = &traj.kernel;
    let e0 = (eta.f)(0.0);
    let inner: Vec<usize> = (0..grid.len()).filter(|&i| grid.inside(i, 0.9)).collect();
    let mut plan_cache: Option<OperatorPlan> = None;
    let mut t_eta = |f: &GridFunction| -> Result<Vec<f64>> {
        let shift = if ext == Exterior::Zero { e0 } else { 0.0 };
        let vals: Vec<f64> = f.values.iter().map(|v| (eta.f)(*v) - shift).collect();
        if plan_cache.is_none() || !kernel.flags.time_independent {
            plan_cache = Some(OperatorPlan::build(kernel, grid, f.time, ext, &traj.options.plan)?);
        }
        let mut out = vec![0.0; vals.len()];
        plan_cache.as_ref().unwrap().apply_values(&vals, &mut out);
        Ok(out)
    };
    let mut max_d = f64::NEG_INFINITY;
    let mut pairs = 0;
    let mut prev: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for f in &traj.frames {
        let te = t_eta(f)?;
        let ev: Vec<f64> = f.values.iter().map(|v| (eta.f)(*v)).collect();
        if let Some((t0, e_prev, te_prev)) = prev.take() {
            let dt = f.time - t0;
            if dt > 0.0 {
                for &i in &inner {
                    let d = (ev[i] - e_prev[i]) / dt + 0.5 * (te[i] + te_prev[i]);
                    max_d = max_d.max(d);
                }
                pairs += 1;
            }
        }
        prev = Some((f.time, ev, te));
    }
    let linf = traj.step_norms.iter().map(|s| s.linf).fold(0.0, f64::max);
    let tolerance = 10.0 * (traj.dt + traj.h()) * (1.0 + linf * linf) * kernel.params.lambda;
    if pairs == 0 {
        max_d = 0.0;
    }
    Ok(ConvexityReport { eta: eta.name.clone(), max_d, tolerance, pass: max_d <= tolerance, pairs })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BumpFamily {
    pub amplitude: f64,
    /// Gaussian standard deviation.
    pub sigma: f64,
}

impl BumpFamily {
    pub fn sample(&self, grid: Grid, exterior: Exterior) -> GridFunction {
        let (a, s) = (self.amplitude, self.sigma);
        GridFunction::from_fn(grid, exterior, move |x| a * (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * s * s)).exp())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub fit: Option<ExponentFit>,
    pub expected: f64,
    pub verdict: Verdict,
    pub m0: f64,
    pub m_end: f64,
    pub t_fit: (f64, f64),
    pub times: Vec<f64>,
    pub linf: Vec<f64>,
}

/// Fit log ‖w(t)‖_∞ against log t over the last decade [horizon/10, horizon].
/// Passes when the slope is within 15% of −N/α; inconclusive when the
/// sup norm never drops below half its initial value.
pub fn linf_decay_fit(kernel: &Kernel, family: &BumpFamily, horizon: f64, grid: Grid, exterior: Exterior) -> Result<DecayFit> {
    let w0 = family.sample(grid, exterior);
    let mut opts = SolveOptions { snapshot_stride: usize::MAX, ..SolveOptions::default() };
    if kernel.flags.translation_invariant && grid.len() >= 1024 {
        opts.plan.fft = Some(true);
    }
    let traj = solve_with(kernel, &w0, horizon, &opts)?;
    let p = kernel.params;
    let expected = -(p.n as f64) / p.alpha;
    let m0 = traj.step_norms[0].linf;
    let m_end = traj.step_norms.last().unwrap().linf;
    let t_fit = (horizon / 10.0, horizon);
    // 40 log-spaced targets, each matched to the nearest step.
    let mut times = Vec::new();
    let mut linf = Vec::new();
    let mut last = usize::MAX;
    for k in 0..40 {
        let target = t_fit.0 * (t_fit.1 / t_fit.0).powf(k as f64 / 39.0);
        let pos = (target - w0.time) / traj.dt;
        // The first sample sits at or just before horizon/10 so the fit spans a full decade.
        let pos = if k == 0 { (pos * (1.0 + 1e-12)).floor() } else { pos.round() };
        let idx = pos.clamp(0.0, (traj.step_norms.len() - 1) as f64) as usize;
        if idx != last {
            times.push(traj.step_norms[idx].t);
            linf.push(traj.step_norms[idx].linf);
            last = idx;
        }
    }
    if m_end > 0.5 * m0 {
        return Ok(DecayFit { fit: None, expected, verdict: Verdict::Inconclusive, m0, m_end, t_fit, times, linf });
    }
    let fit = fit_exponent(&times, &linf, 0x5eed)?;
    let verdict = if (fit.slope - expected).abs() <= 0.15 * expected.abs() { Verdict::Pass } else { Verdict::Fail };
    Ok(DecayFit { fit: Some(fit), expected, verdict, m0, m_end, t_fit, times, linf })
}

const MAGIC: &[u8; 8] = b"NLHFRAME";

/// Little-endian: magic "NLHFRAME", u64 N, u64 n_points, f64 R, f64 dt,
/// u64 frame count, then per frame f64 time followed by n_points^N f64 values.
pub fn write_frames(path: &Path, frames: &[GridFunction], dt: f64) -> Result<()> {
    let grid = frames.first().map(|f| f.grid).ok_or_else(|| Error::Shape("no frames to write".into()))?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(grid.n_dim as u64).to_le_bytes())?;
    out.write_all(&(grid.n as u64).to_le_bytes())?;
    out.write_all(&grid.radius.to_le_bytes())?;
    out.write_all(&dt.to_le_bytes())?;
    out.write_all(&(frames.len() as u64).to_le_bytes())?;
    for f in frames {
        f.same_grid(&frames[0])?;
        out.write_all(&f.time.to_le_bytes())?;
        for v in &f.values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct FrameFile {
    pub grid: Grid,
    pub dt: f64,
    pub frames: Vec<(f64, Vec<f64>)>,
}

pub fn read_frames(path: &Path) -> Result<FrameFile> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let bad = |m: &str| Error::Shape(format!("{}: {m}", path.display()));
    if buf.len() < 48 || &buf[..8] != MAGIC {
        return Err(bad("not a frame file"));
    }
    let u = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let f = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let grid = Grid::new(u(8) as usize, u(16) as usize, f(24))?;
    let dt = f(32);
    let count = u(40) as usize;
    let per = 8 * (1 + grid.len());
    if buf.len() != 48 + count * per {
        return Err(bad(&format!("expected {} bytes, found {}", 48 + count * per, buf.len())));
    }
    let frames = (0..count)
        .map(|k| {
            let o = 48 + k * per;
            (f(o), (0..grid.len()).map(|i| f(o + 8 + 8 * i)).collect())
        })
        .collect();
    Ok(FrameFile { grid, dt, frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::library::heat;

    #[test]
    fn zero_stays_zero() {
        let k = heat(1, 0.5).unwrap();
        let g = Grid::d1(64, 4.0);
        let tr = solve_with(&k, &GridFunction::zeros(g, Exterior::Zero), 0.5, &SolveOptions::default()).unwrap();
        assert!(tr.frames.iter().all(|f| f.linf() == 0.0));
        assert_eq!(tr.norm_series.len(), tr.frames.len());
    }

    #[test]
    fn constants_are_stationary() {
        let k = heat(1, 1.5).unwrap();
        let g = Grid::d1(64, 4.0);
        let tr = solve_with(&k, &GridFunction::constant(g, 3.0), 0.2, &SolveOptions::default()).unwrap();
        for f in &tr.frames {
            assert!(f.values.iter().all(|v| (v - 3.0).abs() < 1e-12));
        }
    }

    #[test]
    fn too_large_step_is_rejected() {
        let k = heat(1, 0.5).unwrap();
        let g = Grid::d1(64, 4.0);
        let w0 = GridFunction::zeros(g, Exterior::Zero);
        let err = solve(&k, &w0, 1.0, 10.0, 1).unwrap_err();
        assert!(matches!(err, Error::Stability { .. }));
    }

    #[test]
    fn frames_round_trip() {
        let g = Grid::d1(16, 2.0);
        let mut a = GridFunction::from_fn(g, Exterior::Zero, |x| x[0]);
        let mut b = a.scaled(2.0);
        a.time = 0.0;
        b.time = 0.25;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_frames(&p, &[a.clone(), b.clone()], 0.25).unwrap();
        let r = read_frames(&p).unwrap();
        assert_eq!(r.grid, g);
        assert_eq!(r.frames[1].0, 0.25);
        assert_eq!(r.frames[1].1, b.values);
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 48 + 2 * 8 * 17);
    }

    #[test]
    fn step_count_is_uniform() {
        let (n, dt) = step_count(1.0, 0.3);
        assert_eq!(n, 4);
        assert!((dt - 0.25).abs() < 1e-15);
        assert_eq!(step_count(1.0, 0.25).0, 4);
    }
}
