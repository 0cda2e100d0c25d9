use super::{norm, Kernel};
use crate::error::{Error, Result};
use crate::exec;
use crate::quad::sphere_area;
use serde::Serialize;
use std::f64::consts::PI;

/// Where the conditions are sampled. Certification is only as good as the plan.
#[derive(Clone, Debug, Serialize)]
pub struct SamplingPlan {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    /// Number of equally spaced directions on the circle (N = 2).
    pub sphere_m: usize,
    /// Hölder offsets as fractions of the base radius.
    pub holder_steps: Vec<f64>,
}

impl SamplingPlan {
    /// 8 times in [0, t_max ∧ 1], 16 points in the box, 24 log-spaced radii in [h/2, 4R].
    pub fn default_for(n: usize, box_radius: f64, h: f64, t_max: f64) -> Self {
        let tm = if t_max.is_finite() { t_max.min(1.0) } else { 1.0 };
        let times = (0..8).map(|i| tm * i as f64 / 7.0).collect();
        let points = if n == 1 {
            (0..16).map(|i| vec![-box_radius + 2.0 * box_radius * (i as f64 + 0.5) / 16.0]).collect()
        } else {
            let mut v = Vec::new();
            for i in 0..4 {
                for j in 0..4 {
                    let a = -box_radius + 2.0 * box_radius * (i as f64 + 0.5) / 4.0;
                    let b = -box_radius + 2.0 * box_radius * (j as f64 + 0.5) / 4.0;
                    v.push(vec![a, b]);
                }
            }
            v
        };
        SamplingPlan { times, points, radii: log_space(h / 2.0, 4.0 * box_radius, 24), sphere_m: 64, holder_steps: log_space(1e-3, 1.0, 7) }
    }
}

pub(crate) fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub witness: Option<Sample>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CancellationRow {
    pub s: f64,
    /// max over sampled (t, x) of |∫ k(t,x,sσ) σ dσ| / s^ν
    pub ratio: f64,
    /// the same without the s^ν normalisation
    pub moment: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub symmetry_max_defect: f64,
    pub lower_bound_margin: f64,
    pub upper_bound_margin: f64,
    pub holder_defect: Option<f64>,
    pub cancellation_profile: Vec<CancellationRow>,
    pub symmetry: Verdict,
    pub lower_bound: Verdict,
    pub upper_bound: Verdict,
    pub holder: Option<Verdict>,
    pub cancellation: Option<Verdict>,
    /// Hölder ⇒ cancellation with constant 2^ν|S₊|τ for s < s₀/2.
    pub holder_implies_cancellation: Option<bool>,
    pub holder_cancellation_constant: Option<f64>,
    /// |∫kσ| ≤ τ̄ s^ν (1 + s^ω) for every sampled s.
    pub extended_cancellation: Option<bool>,
    pub tau_bar: Option<f64>,
    pub sphere_quadrature_tolerance: f64,
    pub sampled: bool,
}

impl ConditionReport {
    pub fn pass(&self) -> bool {
        self.symmetry.pass
            && self.lower_bound.pass
            && self.upper_bound.pass
            && self.holder.as_ref().map(|v| v.pass).unwrap_or(true)
            && self.cancellation.as_ref().map(|v| v.pass).unwrap_or(true)
    }
}

/// ∫_{S^{N−1}} k(t, x, sσ) σ dσ: the point pair {±1} for N = 1, the M-point
/// trapezoid rule for N = 2.
pub fn sphere_moment(kernel: &Kernel, t: f64, x: &[f64], s: f64, m: usize) -> Vec<f64> {
    if x.len() == 1 {
        vec![kernel.eval(t, x, &[s]) - kernel.eval(t, x, &[-s])]
    } else {
        let w = 2.0 * PI / m as f64;
        let mut acc = [0.0; 2];
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            let (sn, cs) = th.sin_cos();
            let k = kernel.eval(t, x, &[s * cs, s * sn]);
            acc[0] += w * k * cs;
            acc[1] += w * k * sn;
        }
        acc.to_vec()
    }
}

fn directions(n: usize, m: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        (0..m)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / m as f64;
                vec![th.cos(), th.sin()]
            })
            .collect()
    }
}

struct Partial {
    sym: (f64, Option<Sample>),
    sym_rel: f64,
    lower: (f64, Option<Sample>),
    upper: (f64, Option<Sample>),
    holder: (f64, Option<Sample>),
    canc: Vec<f64>,
    err: Option<Error>,
}

pub fn check_conditions(kernel: &Kernel, plan: &SamplingPlan) -> Result<ConditionReport> {
    let p = kernel.params;
    let n = p.n;
    let dirs = directions(n, if n == 1 { 2 } else { 16 });
    let hi = p.high_order;
    let jobs: Vec<(f64, &Vec<f64>)> = plan.times.iter().flat_map(|&t| plan.points.iter().map(move |x| (t, x))).collect();
    let nu = hi.map(|h| h.nu).unwrap_or(0.0);
    let s0 = hi.map(|h| h.s0.value()).unwrap_or(f64::INFINITY);

    let parts: Vec<Partial> = exec::map(jobs.len(), |ji| {
        let (t, x) = jobs[ji];
        let mut out = Partial {
            sym: (0.0, None),
            sym_rel: 0.0,
            lower: (f64::INFINITY, None),
            upper: (f64::INFINITY, None),
            holder: (f64::NEG_INFINITY, None),
            canc: vec![0.0; plan.radii.len()],
            err: None,
        };
        let eval = |z: &[f64]| -> std::result::Result<f64, Error> {
            let v = kernel.eval(t, x, z);
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(Error::Sample { t, x: x.clone(), z: z.to_vec(), value: v })
            }
        };
        let sample = |z: &[f64]| Some(Sample { t, x: x.clone(), z: z.to_vec() });
        for &s in &plan.radii {
            for d in &dirs {
                let z: Vec<f64> = d.iter().map(|v| v * s).collect();
                let a = match eval(&z) {
                    Ok(v) => v,
                    Err(e) => {
                        out.err = Some(e);
                        return out;
                    }
                };
                let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
                let mz: Vec<f64> = z.iter().map(|v| -v).collect();
                let b = kernel.eval(t, &y, &mz);
                let def = (a - b).abs();
                if def > out.sym.0 {
                    out.sym = (def, sample(&z));
                }
                out.sym_rel = out.sym_rel.max(def / (1.0 + a.max(b)));
                if p.zeta.covers(s) {
                    let m = p.lambda * a - 1.0;
                    if m < out.lower.0 {
                        out.lower = (m, sample(&z));
                    }
                }
                let m = p.lambda * (1.0 + s.powf(p.omega)) - a;
                if m < out.upper.0 {
                    out.upper = (m, sample(&z));
                }
                if hi.is_some() && s <= s0 {
                    for &f in &plan.holder_steps {
                        let dz = f * s;
                        if dz > s0 || dz <= 0.0 {
                            continue;
                        }
                        for e in &dirs {
                            let zt: Vec<f64> = z.iter().zip(e).map(|(a, b)| a + dz * b).collect();
                            if norm(&zt) == 0.0 {
                                continue;
                            }
                            let q = (a - kernel.eval(t, x, &zt)).abs() / dz.powf(nu);
                            if q > out.holder.0 {
                                out.holder = (q, sample(&z));
                            }
                        }
                    }
                }
            }
        }
        if hi.is_some() {
            for (i, &s) in plan.radii.iter().enumerate() {
                out.canc[i] = norm(&sphere_moment(kernel, t, x, s, plan.sphere_m));
            }
        }
        out
    });

    let mut sym = (0.0, None);
    let mut sym_rel = 0.0f64;
    let mut lower = (f64::INFINITY, None);
    let mut upper = (f64::INFINITY, None);
    let mut holder = (f64::NEG_INFINITY, None);
    let mut moments = vec![0.0f64; plan.radii.len()];
    for part in parts {
        if let Some(e) = part.err {
            return Err(e);
        }
        sym_rel = sym_rel.max(part.sym_rel);
        if part.sym.0 > sym.0 {
            sym = part.sym;
        }
        if part.lower.0 < lower.0 {
            lower = part.lower;
        }
        if part.upper.0 < upper.0 {
            upper = part.upper;
        }
        if part.holder.0 > holder.0 {
            holder = part.holder;
        }
        for (m, c) in moments.iter_mut().zip(&part.canc) {
            *m = m.max(*c);
        }
    }

    let kmax = p.lambda * (1.0 + plan.radii.last().copied().unwrap_or(1.0).powf(p.omega));
    let quad_tol = 1e-10 * (1.0 + kmax) * sphere_area(n);
    let lower_margin = if lower.0.is_finite() { lower.0 } else { 0.0 };
    let sym_pass = sym_rel <= 1e-12;
    let lower_pass = lower_margin >= -1e-12;
    let upper_pass = upper.0 >= -1e-12 * kmax;

    let mut report = ConditionReport {
        symmetry_max_defect: sym.0,
        lower_bound_margin: lower_margin,
        upper_bound_margin: upper.0,
        holder_defect: None,
        cancellation_profile: Vec::new(),
        symmetry: Verdict { pass: sym_pass, witness: if sym_pass { None } else { sym.1 } },
        lower_bound: Verdict { pass: lower_pass, witness: if lower_pass { None } else { lower.1 } },
        upper_bound: Verdict { pass: upper_pass, witness: if upper_pass { None } else { upper.1 } },
        holder: None,
        cancellation: None,
        holder_implies_cancellation: None,
        holder_cancellation_constant: None,
        extended_cancellation: None,
        tau_bar: None,
        sphere_quadrature_tolerance: quad_tol,
        sampled: true,
    };

    if let Some(h) = hi {
        let hq = if holder.0.is_finite() { holder.0 } else { 0.0 };
        let hdef = hq - h.tau;
        let hpass = hdef <= 1e-9 * (1.0 + h.tau);
        report.holder_defect = Some(hdef);
        report.holder = Some(Verdict { pass: hpass, witness: if hpass { None } else { holder.1 } });

        report.cancellation_profile = plan
            .radii
            .iter()
            .zip(&moments)
            .map(|(&s, &m)| CancellationRow { s, ratio: m / s.powf(h.nu), moment: m })
            .collect();
        let mut cpass = true;
        let mut cw = None;
        for row in &report.cancellation_profile {
            if row.s < s0 && row.moment > h.tau * row.s.powf(h.nu) + quad_tol {
                cpass = false;
                cw = Some(Sample { t: 0.0, x: vec![], z: vec![row.s] });
                break;
            }
        }
        report.cancellation = Some(Verdict { pass: cpass, witness: cw });

        let c13 = 2f64.powf(h.nu) * sphere_area(n) / 2.0;
        report.holder_cancellation_constant = Some(c13);
        if hpass {
            let ok = report
                .cancellation_profile
                .iter()
                .filter(|r| r.s < s0 / 2.0)
                .all(|r| r.moment <= c13 * h.tau * r.s.powf(h.nu) + quad_tol);
            report.holder_implies_cancellation = Some(ok);
        }
        let tau_bar = if h.s0.is_finite() {
            h.tau.max(sphere_area(n) * p.lambda * s0.powf(-h.nu))
        } else {
            h.tau
        };
        report.tau_bar = Some(tau_bar);
        report.extended_cancellation = Some(
            report
                .cancellation_profile
                .iter()
                .all(|r| r.moment <= tau_bar * r.s.powf(h.nu) * (1.0 + r.s.powf(p.omega)) + quad_tol),
        );
    }
    Ok(report)
}
