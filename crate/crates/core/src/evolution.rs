//! Short-time evolution of the test class, calibration of the rate
//! constants, and the iteration schedule that chains short-time steps.

use crate::error::{domain, Error, Result};
use crate::exec;
use crate::grid::{fmt, Grid, GridFunction};
use crate::kernels::Kernel;
use crate::nonlocal_op::PlanOptions;
use crate::solver::{self, Dt, SolveOptions, Trajectory};
use crate::testclass::{self, membership, MembershipReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug)]
pub struct Member {
    pub phi0: GridFunction,
    pub r: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibratedConstants {
    pub n: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// Rate constants normalised by the ensemble class constant.
    pub c_conc: f64,
    pub c_linf: f64,
    pub c_l1: f64,
    /// Window fraction over which the three inequalities were measured.
    pub delta_linf: f64,
    pub delta_l1: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub delta5: f64,
    pub delta: f64,
    /// Root of (1+x)^{N+β} = 1 + 2(N+β)x used for δ₅.
    pub x_star: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "A_ens")]
    pub a_ens: f64,
    pub beta: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// A obtained if C_l1 = C_linf were forced (the normalisation the proof
    /// assumes); reported, not used.
    pub a_paper_normalisation: f64,
    pub members: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl CalibratedConstants {
    /// A^{(α−γ)/N}
    pub fn conc_power(&self) -> f64 {
        self.a.powf((self.alpha - self.gamma) / self.n as f64)
    }

    /// z(r, s) = r(1 + L s/r^α)
    pub fn z(&self, r: f64, s: f64) -> f64 {
        r * (1.0 + self.l * s / r.powf(self.alpha))
    }

    /// The Step 5 relations, each checked as an inequality or identity in
    /// floating point.
    pub fn invariants(&self) -> Vec<InvariantCheck> {
        let n = self.n as f64;
        let p = self.conc_power();
        let le = |name: &str, lhs: f64, rhs: f64| InvariantCheck { name: name.into(), lhs, rhs, pass: lhs <= rhs };
        let eq = |name: &str, lhs: f64, rhs: f64| InvariantCheck {
            name: name.into(),
            lhs,
            rhs,
            pass: (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(lhs.abs()),
        };
        vec![
            le("A >= 1", 1.0, self.a),
            le(
                "(8/gamma)(N+1/2) C_conc A^((alpha-gamma)/N) <= C_linf A^(alpha/N)",
                (8.0 / self.gamma) * (n + 0.5) * self.c_conc * p,
                self.c_linf * self.a.powf(self.alpha / n) * (1.0 + 1e-12),
            ),
            le(
                "(4/gamma) beta C_conc A^((alpha-gamma)/N) <= C_l1",
                (4.0 / self.gamma) * self.beta * self.c_conc * p,
                self.c_l1 * (1.0 + 1e-12),
            ),
            le("0 < beta", 0.0, self.beta),
            le("beta <= gamma/2", self.beta, self.gamma / 2.0),
            eq("L = 2/(gamma-beta) C_conc A^((alpha-gamma)/N)", self.l, 2.0 / (self.gamma - self.beta) * self.c_conc * p),
            eq("delta3 = min(delta_linf, delta_l1)", self.delta3, self.delta_linf.min(self.delta_l1)),
            eq("delta4 = min(delta3, 1/L)", self.delta4, self.delta3.min(1.0 / self.l)),
            eq("delta5 = min(delta4, x*/L)", self.delta5, self.delta4.min(self.x_star / self.l)),
            eq("delta = delta5", self.delta, self.delta5),
            le("(1+x*)^(N+beta) <= 1+2(N+beta)x*", (1.0 + self.x_star).powf(n + self.beta), (1.0 + 2.0 * (n + self.beta) * self.x_star) * (1.0 + 1e-12)),
        ]
    }

    pub fn invariants_hold(&self) -> bool {
        self.invariants().iter().all(|c| c.pass)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Largest x with (1+x)^{N+β} ≤ 1 + 2(N+β)x, by bisection (the left side is
/// convex, so the set is an interval starting at 0).
pub fn x_star(n: usize, beta: f64) -> f64 {
    let p = n as f64 + beta;
    let ok = |x: f64| (1.0 + x).powf(p) <= 1.0 + 2.0 * p * x;
    let (mut lo, mut hi) = (0.0, 1.0);
    while ok(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MemberSeries {
    pub index: usize,
    pub r: f64,
    pub t: Vec<f64>,
    pub concentration: Vec<f64>,
    pub linf: Vec<f64>,
    pub l1: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct CalibrationOptions {
    /// Window fraction: members evolve on [0, horizon_fraction·r^α].
    pub horizon_fraction: f64,
    /// Steps per window at least this many.
    pub min_steps: usize,
    pub plan: PlanOptions,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { horizon_fraction: 0.02, min_steps: 50, plan: PlanOptions::default() }
    }
}

fn evolve(kernel: &Kernel, phi0: &GridFunction, horizon: f64, min_steps: usize, gamma: f64, plan: &PlanOptions) -> Result<Trajectory> {
    let back = kernel.backward(horizon)?;
    let bound = solver::stability_bound(&back, phi0.grid, phi0.exterior, 0.0, horizon, plan)?;
    let dt = (0.9 * bound).min(horizon / min_steps as f64);
    let opts = SolveOptions {
        dt: Dt::Fixed(dt),
        snapshot_stride: 1,
        plan: *plan,
        concentration_gamma: Some(gamma),
        ..SolveOptions::default()
    };
    let mut phi = phi0.clone();
    phi.time = 0.0;
    solver::solve_with(&back, &phi, horizon, &opts)
}

/// Class constant making the L^∞ term of every member about 0.1.
pub fn ensemble_class_constant(ensemble: &[Member]) -> f64 {
    ensemble
        .iter()
        .map(|m| 10.0 * m.phi0.linf() * m.r.powi(m.phi0.grid.n_dim as i32))
        .fold(1.0, f64::max)
}

/// Fit the smallest rate constants over the ensemble and solve Step 5.
pub fn calibrate(kernel: &Kernel, ensemble: &[Member], gamma: f64, opts: &CalibrationOptions) -> Result<(CalibratedConstants, Vec<MemberSeries>)> {
    if ensemble.is_empty() {
        return Err(Error::Calibration("empty ensemble".into()));
    }
    let p = kernel.params;
    let n = p.n;
    let alpha = p.alpha;
    let a_ens = ensemble_class_constant(ensemble);
    for (i, m) in ensemble.iter().enumerate() {
        if m.phi0.linf() == 0.0 {
            return Err(Error::Precondition(format!("member {i} is the zero function; its decay is unmeasurable")));
        }
        let rep = membership(&m.phi0, m.r, a_ens, gamma)?;
        if !rep.mean_zero_pass || rep.factor > 1.0 + 1e-9 {
            return Err(Error::Precondition(format!(
                "member {i} is not certified in U_r: factor {:e}, mean residual {:e}",
                rep.factor, rep.mean_residual
            )));
        }
    }
    let hf = opts.horizon_fraction;
    let runs: Vec<Result<MemberSeries>> = exec::map(ensemble.len(), |i| {
        let m = &ensemble[i];
        let tr = evolve(kernel, &m.phi0, hf * m.r.powf(alpha), opts.min_steps, gamma, &opts.plan)?;
        Ok(MemberSeries {
            index: i,
            r: m.r,
            t: tr.norm_series.iter().map(|x| x.t).collect(),
            concentration: tr.norm_series.iter().map(|x| x.concentration.unwrap_or(0.0)).collect(),
            linf: tr.norm_series.iter().map(|x| x.linf).collect(),
            l1: tr.norm_series.iter().map(|x| x.l1).collect(),
        })
    });
    let series: Vec<MemberSeries> = runs.into_iter().collect::<Result<_>>()?;
    let (mut cc, mut ci, mut cl) = (f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY);
    for s in &series {
        let last = s.t.len() - 1;
        if s.l1[last] >= s.l1[0] || s.linf[last] >= s.linf[0] {
            return Err(Error::Calibration(format!("member {} (r = {}) shows no L^1 or L^inf decay over the window", s.index, s.r)));
        }
        let ra = s.r.powf(alpha);
        let rn = s.r.powi(n as i32);
        for k in 1..s.t.len() {
            let sig = s.t[k] / ra;
            cc = cc.max((s.concentration[k] / s.r.powf(gamma) - 1.0) / sig);
            ci = ci.min((1.0 - s.linf[k] * rn / a_ens) / sig);
            cl = cl.min((1.0 - s.l1[k]) / sig);
        }
    }
    if !(cl > 0.0) {
        return Err(Error::Calibration(format!("no measurable L^1 decay rate (C_l1 = {cl:e})")));
    }
    if !(ci > 0.0) {
        return Err(Error::Calibration(format!("no measurable L^inf decay rate (C_linf = {ci:e})")));
    }
    let cc = cc.max(f64::MIN_POSITIVE);
    let nf = n as f64;
    let c_conc = cc / a_ens.powf((alpha - gamma) / nf);
    let c_linf = ci / a_ens.powf(alpha / nf);
    let c_l1 = cl;
    let closed = |c_inf: f64| ((8.0 / gamma) * (nf + 0.5) * c_conc / c_inf).powf(nf / gamma);
    let a = 1f64.max(a_ens).max(closed(c_linf));
    if a > 1e6 {
        return Err(Error::Calibration(format!(
            "the class constant inequality needs A = {a:e} > 1e6 (C_conc = {c_conc:e}, C_linf = {c_linf:e})"
        )));
    }
    let conc_power = a.powf((alpha - gamma) / nf);
    let beta = (gamma / 2.0).min((gamma / 4.0) * c_l1 / (c_conc * conc_power));
    let l = 2.0 / (gamma - beta) * c_conc * conc_power;
    let delta3 = hf;
    let delta4 = delta3.min(1.0 / l);
    let xs = x_star(n, beta);
    let delta5 = delta4.min(xs / l);
    let c_min = c_l1.min(c_linf);
    Ok((
        CalibratedConstants {
            n,
            alpha,
            gamma,
            c_conc,
            c_linf,
            c_l1,
            delta_linf: hf,
            delta_l1: hf,
            delta3,
            delta4,
            delta5,
            delta: delta5,
            x_star: xs,
            a,
            a_ens,
            beta,
            l,
            a_paper_normalisation: 1f64.max(a_ens).max(closed(c_min)),
            members: ensemble.len(),
        },
        series,
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackRow {
    pub t: f64,
    pub r: f64,
    pub z: f64,
    pub factor: f64,
    pub envelope: f64,
    pub l1: f64,
    pub linf: f64,
    pub concentration: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackReport {
    pub rows: Vec<TrackRow>,
    pub slack: f64,
    /// max factor / envelope
    pub worst_ratio: f64,
    pub pass: bool,
    /// Index of the first failing snapshot.
    pub first_failure: Option<usize>,
}

impl TrackReport {
    fn from_rows(rows: Vec<TrackRow>, slack: f64) -> Self {
        let mut worst = 0.0f64;
        let mut first = None;
        for (i, r) in rows.iter().enumerate() {
            let q = r.factor / r.envelope;
            worst = worst.max(q);
            if q > 1.0 + slack && first.is_none() {
                first = Some(i);
            }
        }
        TrackReport { rows, slack, worst_ratio: worst, pass: first.is_none(), first_failure: first }
    }

    /// Columns t, r, z, factor, envelope, l1, linf, concentration.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "r", "z", "factor", "envelope", "l1", "linf", "concentration"])?;
        for r in &self.rows {
            w.write_record([r.t, r.r, r.z, r.factor, r.envelope, r.l1, r.linf, r.concentration].map(fmt))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrackOptions {
    pub slack: f64,
    pub min_steps: usize,
    /// Horizon for r = 1 (linear growth regime); defaults to δ.
    pub horizon_r1: Option<f64>,
    pub plan: PlanOptions,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions { slack: 0.05, min_steps: 50, horizon_r1: None, plan: PlanOptions::default() }
    }
}

fn row(phi: &GridFunction, r: f64, z: f64, envelope: f64, c: &CalibratedConstants) -> Result<TrackRow> {
    let m: MembershipReport = membership(phi, z, c.a, c.gamma)?;
    Ok(TrackRow { t: phi.time, r, z, factor: m.factor, envelope, l1: m.l1, linf: m.linf, concentration: m.concentration })
}

/// Evolve φ₀ ∈ U_r on [0, δr^α] and compare the membership factor of φ(s)
/// in U_{z(r,s)} with (r/z)^β. For r = 1 the envelope is 1 + Ls in U_1.
pub fn track_short_time(kernel: &Kernel, phi0: &GridFunction, r: f64, c: &CalibratedConstants, opts: &TrackOptions) -> Result<TrackReport> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(domain("r", format!("radius {r} must lie in (0, 1]")));
    }
    let unit = (r - 1.0).abs() < 1e-15;
    let horizon = if unit { opts.horizon_r1.unwrap_or(c.delta) } else { c.delta * r.powf(c.alpha) };
    let tr = evolve(kernel, phi0, horizon, opts.min_steps, c.gamma, &opts.plan)?;
    let rows: Vec<Result<TrackRow>> = exec::map(tr.frames.len(), |k| {
        let f = &tr.frames[k];
        let s = f.time;
        if unit {
            row(f, 1.0, 1.0, 1.0 + c.l * s, c)
        } else {
            let z = c.z(r, s);
            row(f, r, z, (r / z).powf(c.beta), c)
        }
    });
    Ok(TrackReport::from_rows(rows.into_iter().collect::<Result<_>>()?, opts.slack))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolutionSchedule {
    pub r: f64,
    pub eta: f64,
    pub k: usize,
    /// z_0..z_k
    pub z_levels: Vec<f64>,
    /// t_0..t_k (t_{k+1} = ∞ is implicit)
    pub t_knots: Vec<f64>,
    pub t_tilde: f64,
    pub alpha: f64,
    pub delta: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

pub fn schedule(r: f64, c: &CalibratedConstants) -> Result<EvolutionSchedule> {
    schedule_from(r, c.alpha, c.delta, c.l)
}

/// The ladder r = z₀ < z₁ < … < z_{k−1} ≤ z_k = 1 with knots t_n.
pub fn schedule_from(r: f64, alpha: f64, delta: f64, l: f64) -> Result<EvolutionSchedule> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(domain("r", format!("radius {r} must lie in (0, 1]")));
    }
    if !(delta > 0.0 && l > 0.0) {
        return Err(domain("delta, L", format!("need delta > 0 and L > 0, got {delta}, {l}")));
    }
    let eta = 1.0 + l * delta;
    // Smallest k ≥ 1 with r η^{k−1} ≤ 1 < r η^k.
    let mut k = 1usize;
    while r * eta.powi(k as i32) <= 1.0 {
        k += 1;
    }
    let ea = eta.powf(alpha);
    let mut z: Vec<f64> = (0..k).map(|n| r * eta.powi(n as i32)).collect();
    z.push(1.0);
    let mut t: Vec<f64> = (0..k).map(|n| delta * r.powf(alpha) * (ea.powi(n as i32) - 1.0) / (ea - 1.0)).collect();
    let zk1 = z[k - 1];
    let t_tilde = (1.0 / zk1 - 1.0) * zk1.powf(alpha) / l;
    t.push(t[k - 1] + t_tilde);
    let s = EvolutionSchedule { r, eta, k, z_levels: z, t_knots: t, t_tilde, alpha, delta, l };
    s.check()?;
    Ok(s)
}

impl EvolutionSchedule {
    fn check(&self) -> Result<()> {
        let z = &self.z_levels;
        let t = &self.t_knots;
        let bad = |m: String| Err(Error::Range(format!("schedule for r = {}: {m}", self.r)));
        for w in z.windows(2) {
            if w[1] < w[0] {
                return bad(format!("levels not increasing: {} then {}", w[0], w[1]));
            }
        }
        for w in t.windows(2) {
            if w[1] < w[0] {
                return bad(format!("knots not increasing: {} then {}", w[0], w[1]));
            }
        }
        if !(self.t_tilde >= 0.0 && self.t_tilde <= self.delta * z[self.k - 1].powf(self.alpha) * (1.0 + 1e-12)) {
            return bad(format!("t_tilde = {} outside [0, delta z_(k-1)^alpha)", self.t_tilde));
        }
        Ok(())
    }

    /// z(r, t): linear growth inside each rung, 1 from t_k on.
    pub fn z(&self, t: f64) -> f64 {
        let k = self.k;
        if t >= self.t_knots[k] {
            return 1.0;
        }
        let n = (0..k).rev().find(|&n| t >= self.t_knots[n]).unwrap_or(0);
        let zn = self.z_levels[n];
        (zn * (1.0 + self.l * (t - self.t_knots[n]) / zn.powf(self.alpha))).min(1.0)
    }

    /// max_n |t_n − Σ_{m<n} δ z_m^α| / t_n over n ≤ k−1.
    pub fn telescoping_defect(&self) -> f64 {
        let mut acc = 0.0;
        let mut worst = 0.0f64;
        for n in 1..self.k {
            acc += self.delta * self.z_levels[n - 1].powf(self.alpha);
            worst = worst.max((self.t_knots[n] - acc).abs() / self.t_knots[n]);
        }
        worst
    }

    /// min over the samples below t_k of z^α − ((η^α−1)/(ηδ))·t, relative to z^α.
    pub fn careful_repetition_margin(&self, samples: usize) -> f64 {
        let c = (self.eta.powf(self.alpha) - 1.0) / (self.eta * self.delta);
        let tk = self.t_knots[self.k];
        let mut worst = f64::INFINITY;
        for i in 0..samples {
            let t = tk * i as f64 / samples as f64;
            let za = self.z(t).powf(self.alpha);
            worst = worst.min((za - c * t) / za);
        }
        worst
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompositionReport {
    pub s1: f64,
    pub s2: f64,
    pub z1: f64,
    pub z2: f64,
    pub factor_s1: f64,
    pub factor: f64,
    /// (r/z₂)^β
    pub bound: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Run s₁ from U_r, restart in U_{z(r,s₁)} for s₂, and compare the factor
/// of φ(s₁+s₂) in U_{z(z(r,s₁),s₂)} with (r/z₂)^β·(1 + slack).
pub fn composition(kernel: &Kernel, phi0: &GridFunction, r: f64, c: &CalibratedConstants, s1: f64, s2: f64, slack: f64, plan: &PlanOptions) -> Result<CompositionReport> {
    let z1 = c.z(r, s1);
    if s1 > c.delta * r.powf(c.alpha) * (1.0 + 1e-12) || z1 > 1.0 || s2 > c.delta * z1.powf(c.alpha) * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "need s1 <= delta r^alpha, s2 <= delta z1^alpha and z1 <= 1 (s1 = {s1}, s2 = {s2}, z1 = {z1})"
        )));
    }
    let z2 = c.z(z1, s2);
    let back = kernel.backward(s1 + s2)?;
    let bound_dt = solver::stability_bound(&back, phi0.grid, phi0.exterior, 0.0, s1 + s2, plan)?;
    let (n1, _) = solver::step_count(s1, (0.9 * bound_dt).min(s1 / 50.0));
    let dt = s1 / n1 as f64;
    let opts = SolveOptions { dt: Dt::Fixed(dt), snapshot_stride: n1, plan: *plan, ..SolveOptions::default() };
    let mut phi = phi0.clone();
    phi.time = 0.0;
    let first = solver::solve_with(&back, &phi, s1, &opts)?;
    // Restart from φ(s₁) with the same backward kernel, so time continues at s₁.
    let mid = first.last().clone();
    let (n2, _) = solver::step_count(s2, dt);
    let opts2 = SolveOptions { dt: Dt::Fixed(s2 / n2 as f64), snapshot_stride: n2, plan: *plan, ..SolveOptions::default() };
    let second = solver::solve_with(&back, &mid, s2, &opts2)?;
    let f1 = membership(&mid, z1, c.a, c.gamma)?.factor;
    let f2 = membership(second.last(), z2, c.a, c.gamma)?.factor;
    let bound = (r / z2).powf(c.beta);
    let ratio = f2 / bound;
    Ok(CompositionReport { s1, s2, z1, z2, factor_s1: f1, factor: f2, bound, ratio, pass: ratio <= 1.0 + slack })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LongTimeReport {
    pub schedule: EvolutionSchedule,
    pub rows: Vec<TrackRow>,
    /// (a): factor ≤ (r/z)^β(1 + L(t−t_k)⁺)(1 + slack)
    pub worst_ratio: f64,
    pub pass_membership: bool,
    /// (b): C = max ‖φ(t)‖₁ / (r^β max{1, t^{−β/α}}) over t > 0
    pub l1_constant: f64,
    /// ‖φ(t)‖₁ ≤ r^β(1 + slack) for t ≥ t_k
    pub pass_after_ladder: bool,
    pub slack: f64,
}

pub fn track_long_time(kernel: &Kernel, phi0: &GridFunction, r: f64, c: &CalibratedConstants, t_end: f64, opts: &TrackOptions) -> Result<LongTimeReport> {
    let sch = schedule(r, c)?;
    let back = kernel.backward(t_end)?;
    let bound = solver::stability_bound(&back, phi0.grid, phi0.exterior, 0.0, t_end, &opts.plan)?;
    let first_rung = c.delta * r.powf(c.alpha);
    let dt = (0.9 * bound).min(first_rung / opts.min_steps as f64);
    let (steps, dt) = solver::step_count(t_end, dt);
    let stride = (steps / 200).max(1);
    let sopts = SolveOptions { dt: Dt::Fixed(dt), snapshot_stride: stride, plan: opts.plan, ..SolveOptions::default() };
    let mut phi = phi0.clone();
    phi.time = 0.0;
    let tr = solver::solve_with(&back, &phi, t_end, &sopts)?;
    let tk = sch.t_knots[sch.k];
    let rows: Vec<Result<TrackRow>> = exec::map(tr.frames.len(), |i| {
        let f = &tr.frames[i];
        let t = f.time;
        let z = sch.z(t);
        let env = (r / z).powf(c.beta) * (1.0 + c.l * (t - tk).max(0.0));
        row(f, r, z, env, c)
    });
    let rows: Vec<TrackRow> = rows.into_iter().collect::<Result<_>>()?;
    let worst = rows.iter().map(|x| x.factor / x.envelope).fold(0.0, f64::max);
    let rb = r.powf(c.beta);
    let l1c = rows
        .iter()
        .filter(|x| x.t > 0.0)
        .map(|x| x.l1 / (rb * 1f64.max(x.t.powf(-c.beta / c.alpha))))
        .fold(0.0, f64::max);
    let after = rows.iter().filter(|x| x.t >= tk).all(|x| x.l1 <= rb * (1.0 + opts.slack));
    Ok(LongTimeReport {
        schedule: sch,
        rows,
        worst_ratio: worst,
        pass_membership: worst <= 1.0 + opts.slack,
        l1_constant: l1c,
        pass_after_ladder: after,
        slack: opts.slack,
    })
}

/// Double bumps with ‖φ‖₁ = 1 and concentration exactly r^γ: random width
/// and translation, separation found by bisection. Radii cycle through `radii`.
pub fn double_bump_ensemble(grid: Grid, radii: &[f64], count: usize, gamma: f64, seed: u64) -> Result<Vec<Member>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(f64, f64, f64)> = (0..count)
        .map(|i| {
            let r = radii[i % radii.len()];
            (r, rng.random_range(0.15..0.35), rng.random_range(-0.5..0.5))
        })
        .collect();
    let out: Vec<Result<Member>> = exec::map(count, |i| {
        let (r, wf, shift) = draws[i];
        let target = r.powf(gamma);
        let mut width = wf * r;
        let mut center = vec![0.0; grid.n_dim];
        center[0] = shift;
        for _ in 0..8 {
            let conc = |d: f64| -> Result<(f64, GridFunction)> {
                let phi = testclass::double_bump(grid, &center, d, width, 0.5)?;
                Ok((testclass::best_center(&phi, gamma).1, phi))
            };
            let mut lo = 1.05 * width + grid.h();
            if conc(lo)?.0 > target {
                width *= 0.7;
                continue;
            }
            let mut hi = lo.max(r);
            while conc(hi)?.0 < target {
                hi *= 2.0;
                if hi > grid.radius / 2.0 {
                    return Err(Error::Precondition(format!("radius {r} needs a wider box")));
                }
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if conc(mid)?.0 <= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (_, phi) = conc(lo)?;
            return Ok(Member { phi0: phi, r });
        }
        Err(Error::Precondition(format!("no double bump with concentration r^gamma for r = {r}")))
    });
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_radius_ladder_degenerates() {
        let s = schedule_from(1.0, 0.7, 0.1, 2.0).unwrap();
        assert_eq!(s.k, 1);
        assert_eq!(s.z_levels, vec![1.0, 1.0]);
        assert_eq!(s.t_tilde, 0.0);
    }

    #[test]
    fn ladder_matches_closed_forms() {
        let s = schedule_from(0.5, 1.0, 0.1, 2.0).unwrap();
        assert!((s.eta - 1.2).abs() < 1e-15);
        // 0.5·1.2^3 = 0.864 ≤ 1 < 0.5·1.2^4 = 1.0368
        assert_eq!(s.k, 4);
        assert!((s.t_knots[1] - s.t_knots[0] - 0.05).abs() < 1e-15);
        assert!(s.telescoping_defect() < 1e-12);
        assert!(s.careful_repetition_margin(2000) >= 0.0);
        let zk1 = s.z_levels[3];
        assert!((zk1 * (1.0 + 2.0 * s.t_tilde / zk1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn x_star_is_the_crossing() {
        let x = x_star(1, 0.2);
        assert!((1.0 + x).powf(1.2) <= 1.0 + 2.4 * x);
        assert!((1.0 + x * (1.0 + 1e-9)).powf(1.2) > 1.0 + 2.4 * x * (1.0 + 1e-9));
    }
}
