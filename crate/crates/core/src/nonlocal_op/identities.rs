//! Duality, mean zero, and the |x|^γ profile.

use super::plan::{exterior_rays, ray_integral, OperatorPlan, PlanOptions};
use crate::error::Result;
use crate::exec::{self, psum_by};
use crate::grid::{Exterior, Grid, GridFunction};
use crate::kernels::{Kernel, KernelParams};
use crate::quad::{g16, g4, g8};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    /// |⟨f, Tg⟩ − ⟨Tf, g⟩| / (1 + ‖f‖₂‖g‖₂)
    pub residual: f64,
    pub f_tg: f64,
    pub tf_g: f64,
    /// (⟨|f|, e_g⟩ + ⟨e_f, |g|⟩) / (1 + ‖f‖₂‖g‖₂) from the quadrature error estimates.
    pub error_scale: f64,
    pub warning: Option<String>,
}

/// Sup over the outer 5% of the box relative to the global sup.
fn boundary_ratio(f: &GridFunction) -> f64 {
    let sup = f.linf();
    if sup == 0.0 {
        return 0.0;
    }
    let edge = (0..f.values.len())
        .filter(|&i| !f.grid.inside(i, 0.95))
        .fold(0.0f64, |m, i| m.max(f.values[i].abs()));
    edge / sup
}

fn decay_warning(f: &GridFunction, g: &GridFunction) -> Option<String> {
    let (a, b) = (boundary_ratio(f), boundary_ratio(g));
    if a > 1e-8 || b > 1e-8 {
        Some(format!(
            "inputs do not decay at the box boundary (outer 5% sup ratios {a:e}, {b:e}); truncation dominates the residual"
        ))
    } else {
        None
    }
}

pub fn verify_duality(kernel: &Kernel, f: &GridFunction, g: &GridFunction, t: f64) -> Result<DualityReport> {
    f.same_grid(g)?;
    super::check_finite_values(f)?;
    super::check_finite_values(g)?;
    let plan = OperatorPlan::build(kernel, f.grid, t, f.exterior, &PlanOptions::pairwise())?;
    let tf = plan.apply(f);
    let tg = plan.apply(&g.clone().with_exterior(f.exterior));
    let f_tg = f.dot(&tg.values)?;
    let tf_g = tf.values.dot(g)?;
    let denom = 1.0 + f.l2() * g.l2();
    let vol = f.grid.cell_volume();
    let n = f.values.len();
    let scale = psum_by(n, |i| {
        f.values[i].abs() * tg.quadrature_error_estimate[i] + tf.quadrature_error_estimate[i] * g.values[i].abs()
    }) * vol;
    Ok(DualityReport {
        residual: (f_tg - tf_g).abs() / denom,
        f_tg,
        tf_g,
        error_scale: scale / denom,
        warning: decay_warning(f, g),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanZeroReport {
    /// |∫ T f| / (1 + ‖f‖₁), the integral taken over all of ℝ^N.
    pub residual: f64,
    /// ∫_box T f
    pub box_integral: f64,
    /// ∫ outside the box of T f; −Σ tail_i f_i h^N under the zero rule.
    pub exterior_integral: f64,
    /// ∫ e / (1 + ‖f‖₁) with e the quadrature error estimate.
    pub error_scale: f64,
    pub warning: Option<String>,
}

/// Under the zero rule the outside of the box contributes
/// ∫_out ∫_box (0 − f(y)) K dy dx = −Σ_j f_j ∫_out K(x, y_j) dx, which by the
/// symmetry of K is the tail weight of node j. Under the constant rule only
/// the box integral is available and a warning is attached.
pub fn verify_mean_zero(kernel: &Kernel, f: &GridFunction, t: f64) -> Result<MeanZeroReport> {
    super::check_finite_values(f)?;
    let plan = OperatorPlan::build(kernel, f.grid, t, f.exterior, &PlanOptions::pairwise())?;
    let out = plan.apply(f);
    let vol = f.grid.cell_volume();
    let box_integral = out.values.integral();
    let (exterior_integral, mut warning) = match f.exterior {
        Exterior::Zero => (-psum_by(f.values.len(), |i| plan.tail[i] * f.values[i]) * vol, None),
        Exterior::Constant => (0.0, Some("constant exterior rule: only the box integral is measured".to_string())),
    };
    if warning.is_none() {
        warning = decay_warning(f, f);
    }
    let denom = 1.0 + f.l1();
    Ok(MeanZeroReport {
        residual: (box_integral + exterior_integral).abs() / denom,
        box_integral,
        exterior_integral,
        error_scale: psum_by(f.values.len(), |i| out.quadrature_error_estimate[i]) * vol / denom,
        warning,
    })
}

/// ∫_{outside the box} F(y) K(t, x, y) dy along the same rays as the operator's tails.
pub fn exterior_integral<F>(kernel: &Kernel, grid: &Grid, t: f64, x: &[f64; 2], f: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let nd = grid.n_dim;
    let rho = 1.5 * grid.h();
    let alpha = kernel.params.alpha;
    let (panels, lo, hi) = if nd == 1 { (40, g8(), g16()) } else { (24, g4(), g8()) };
    exterior_rays(grid, x, rho)
        .into_iter()
        .map(|(sig, a, w)| {
            let (v, _) = ray_integral(a, alpha, panels, lo, hi, |s| {
                let z = [s * sig[0], s * sig[1]];
                let y = [x[0] + z[0], x[1] + z[1]];
                f(&y[..nd]) * kernel.eval(t, &x[..nd], &z[..nd])
            });
            w * v
        })
        .sum()
}

/// |x|^{γ−α}(1 + |x|^ω) for α < 1, |x|^{γ−α}(1 + |x|^{ν+ω}) for α ≥ 1.
pub fn gamma_normaliser(p: &KernelParams, r: f64) -> f64 {
    let e = if p.alpha < 1.0 { p.omega } else { p.nu().unwrap_or(0.0) + p.omega };
    r.powf(p.gamma - p.alpha) * (1.0 + r.powf(e))
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaRow {
    pub x: Vec<f64>,
    pub r: f64,
    pub value: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaProfile {
    pub n_points: usize,
    pub rows: Vec<GammaRow>,
    pub max_ratio: f64,
    /// Max over the middle third of the samples.
    pub mid_max: f64,
    /// Ratio at the largest |x|.
    pub last_ratio: f64,
}

/// |x|^γ on the grid; cells touching the origin hold their cell average.
fn gamma_input(grid: Grid, gamma: f64) -> GridFunction {
    let h = grid.h();
    let nd = grid.n_dim;
    let rule = g16();
    GridFunction::from_fn(grid, Exterior::Zero, |x| {
        let near = x.iter().all(|v| v.abs() < h);
        if !near {
            return x.iter().map(|v| v * v).sum::<f64>().sqrt().powf(gamma);
        }
        // Split at the origin so the singular point is a panel corner.
        let cuts = |c: f64| -> Vec<(f64, f64)> {
            let (a, b) = (c - h / 2.0, c + h / 2.0);
            if a < 0.0 && b > 0.0 {
                vec![(a, 0.0), (0.0, b)]
            } else {
                vec![(a, b)]
            }
        };
        let mut acc = 0.0;
        if nd == 1 {
            for (a, b) in cuts(x[0]) {
                acc += rule.integrate(a, b, |u| u.abs().powf(gamma));
            }
        } else {
            for (a, b) in cuts(x[0]) {
                for (c, d) in cuts(x[1]) {
                    for (u, wu) in rule.on(a, b) {
                        for (v, wv) in rule.on(c, d) {
                            acc += wu * wv * (u * u + v * v).sqrt().powf(gamma);
                        }
                    }
                }
            }
        }
        acc / grid.cell_volume()
    })
}

/// Ratio |T(|·|^γ)(x)| / normaliser at the sample points. The box truncation
/// is removed exactly: the zero-rule output minus ∫_out |y|^γ K dy.
pub fn gamma_bound_profile(kernel: &Kernel, grid: Grid, t: f64, x_samples: &[Vec<f64>]) -> Result<GammaProfile> {
    let p = kernel.params;
    let f = gamma_input(grid, p.gamma);
    let plan = OperatorPlan::build(kernel, grid, t, Exterior::Zero, &PlanOptions::default())?;
    let out = plan.apply(&f);
    let rmax = x_samples
        .iter()
        .map(|x| x.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max)
        + 2.0 * grid.h();
    let nd = grid.n_dim;
    let gamma = p.gamma;
    let corrected = exec::map(grid.len(), |i| {
        let x = grid.point(i);
        if x[..nd].iter().any(|v| v.abs() > rmax) {
            return out.values.values[i];
        }
        let ext = exterior_integral(kernel, &grid, t, &x, |y| y.iter().map(|v| v * v).sum::<f64>().sqrt().powf(gamma));
        out.values.values[i] - ext
    });
    let tf = out.values.with_values(corrected);
    let rows: Vec<GammaRow> = x_samples
        .iter()
        .map(|x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let value = tf.interpolate(x);
            GammaRow { x: x.clone(), r, value, ratio: value.abs() / gamma_normaliser(&p, r) }
        })
        .collect();
    let m = rows.len();
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mid_max = rows[m / 3..(2 * m / 3).max(m / 3 + 1)].iter().map(|r| r.ratio).fold(0.0, f64::max);
    let last_ratio = rows.iter().max_by(|a, b| a.r.total_cmp(&b.r)).map(|r| r.ratio).unwrap_or(0.0);
    Ok(GammaProfile { n_points: grid.n, rows, max_ratio, mid_max, last_ratio })
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaStudy {
    pub coarse: GammaProfile,
    pub fine: GammaProfile,
    /// |max_fine − max_coarse| / max_coarse
    pub drift: f64,
}

/// Profiles at n and 2n points on the same samples: `n_samples` log-spaced
/// radii in [4h, R/2] along the first axis, h the coarse spacing.
pub fn gamma_bound_study(kernel: &Kernel, grid: Grid, t: f64, n_samples: usize) -> Result<GammaStudy> {
    let h = grid.h();
    let (a, b) = (4.0 * h, grid.radius / 2.0);
    let samples: Vec<Vec<f64>> = (0..n_samples)
        .map(|k| {
            let r = a * (b / a).powf(k as f64 / (n_samples - 1).max(1) as f64);
            let mut x = vec![0.0; grid.n_dim];
            x[0] = r;
            x
        })
        .collect();
    let coarse = gamma_bound_profile(kernel, grid, t, &samples)?;
    let fine = gamma_bound_profile(kernel, grid.refined(), t, &samples)?;
    let drift = (fine.max_ratio - coarse.max_ratio).abs() / coarse.max_ratio;
    Ok(GammaStudy { coarse, fine, drift })
}
