//! The test-function class U_r: mean zero, ‖φ‖₁ ≤ 1, ‖φ‖_∞ ≤ A/r^N and
//! ∫|φ||x − x₀|^γ ≤ r^γ for some centre x₀. Hölder estimators, the pairing,
//! and the forward/backward duality check.

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{Exterior, Grid, GridFunction};
use crate::kernels::Kernel;
use crate::solver::{self, Dt, SolveOptions};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MembershipReport {
    pub r: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub gamma: f64,
    pub center: Vec<f64>,
    pub mean_residual: f64,
    pub concentration: f64,
    pub linf: f64,
    pub l1: f64,
    /// max{‖φ‖₁, (r^N/A)‖φ‖_∞, r^{−γ}·concentration}
    pub factor: f64,
    pub mean_zero_pass: bool,
    pub tolerance: f64,
}

impl MembershipReport {
    pub fn l1_term(&self) -> f64 {
        self.l1
    }
    pub fn linf_term(&self, n_dim: usize) -> f64 {
        self.r.powi(n_dim as i32) / self.a * self.linf
    }
    pub fn concentration_term(&self) -> f64 {
        self.r.powf(-self.gamma) * self.concentration
    }
}

/// ∫|φ(x)||x − x₀|^γ dx by grid quadrature.
pub fn concentration_at(phi: &GridFunction, x0: &[f64], gamma: f64) -> f64 {
    let g = phi.grid;
    let nd = g.n_dim;
    exec::psum_by(g.len(), |i| {
        let v = phi.values[i];
        if v == 0.0 {
            return 0.0;
        }
        let p = g.point(i);
        let mut d2 = 0.0;
        for a in 0..nd {
            d2 += (p[a] - x0[a]) * (p[a] - x0[a]);
        }
        v.abs() * d2.sqrt().powf(gamma)
    }) * g.cell_volume()
}

fn support_box(phi: &GridFunction) -> Option<([f64; 2], [f64; 2], [f64; 2])> {
    let g = phi.grid;
    let nd = g.n_dim;
    let sup = phi.linf();
    if sup == 0.0 {
        return None;
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut c = [0.0; 2];
    let mut mass = 0.0;
    for i in 0..g.len() {
        let v = phi.values[i].abs();
        if v <= 1e-14 * sup {
            continue;
        }
        let p = g.point(i);
        for a in 0..nd {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
            c[a] += v * p[a];
        }
        mass += v;
    }
    for v in c.iter_mut().take(nd) {
        *v /= mass;
    }
    Some((lo, hi, c))
}

fn golden<F: Fn(f64) -> f64>(mut a: f64, mut b: f64, f: F, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn nelder_mead<F: Fn([f64; 2]) -> f64>(start: [f64; 2], step: f64, f: &F, tol: f64) -> ([f64; 2], f64) {
    let mut s = [start, [start[0] + step, start[1]], [start[0], start[1] + step]];
    let mut v = [f(s[0]), f(s[1]), f(s[2])];
    for _ in 0..400 {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        s = [s[idx[0]], s[idx[1]], s[idx[2]]];
        v = [v[idx[0]], v[idx[1]], v[idx[2]]];
        let size = ((s[2][0] - s[0][0]).abs() + (s[2][1] - s[0][1]).abs()).max((s[1][0] - s[0][0]).abs() + (s[1][1] - s[0][1]).abs());
        if size < tol {
            break;
        }
        let c = [(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0];
        let at = |k: f64| [c[0] + k * (s[2][0] - c[0]), c[1] + k * (s[2][1] - c[1])];
        let xr = at(-1.0);
        let fr = f(xr);
        if fr < v[0] {
            let xe = at(-2.0);
            let fe = f(xe);
            if fe < fr {
                s[2] = xe;
                v[2] = fe;
            } else {
                s[2] = xr;
                v[2] = fr;
            }
        } else if fr < v[1] {
            s[2] = xr;
            v[2] = fr;
        } else {
            let xc = if fr < v[2] { at(-0.5) } else { at(0.5) };
            let fc = f(xc);
            if fc < v[2].min(fr) {
                s[2] = xc;
                v[2] = fc;
            } else {
                for k in 1..3 {
                    s[k] = [(s[k][0] + s[0][0]) / 2.0, (s[k][1] + s[0][1]) / 2.0];
                    v[k] = f(s[k]);
                }
            }
        }
    }
    let k = (0..3).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    (s[k], v[k])
}

/// Centre minimising the concentration integral and its value.
/// 1D: 64-point scan of the support, then golden section around the best.
/// 2D: Nelder-Mead from the |φ|-weighted centroid and 8 perturbed seeds.
pub fn best_center(phi: &GridFunction, gamma: f64) -> (Vec<f64>, f64) {
    let g = phi.grid;
    let nd = g.n_dim;
    let Some((lo, hi, c)) = support_box(phi) else {
        return (vec![0.0; nd], 0.0);
    };
    let h = g.h();
    if nd == 1 {
        let f = |x: f64| concentration_at(phi, &[x], gamma);
        let m = 64;
        let span = (hi[0] - lo[0]).max(h);
        let step = span / (m - 1) as f64;
        let mut best = (c[0], f(c[0]));
        for k in 0..m {
            let x = lo[0] + step * k as f64;
            let v = f(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        let (x, v) = golden(best.0 - step, best.0 + step, f, 1e-6 * h);
        if v < best.1 {
            best = (x, v);
        }
        return (vec![best.0], best.1);
    }
    let f = |p: [f64; 2]| concentration_at(phi, &p, gamma);
    let spread = [(hi[0] - lo[0]).max(h), (hi[1] - lo[1]).max(h)];
    let mut seeds = vec![[c[0], c[1]]];
    for k in 0..8 {
        let th = PI * k as f64 / 4.0;
        seeds.push([c[0] + 0.25 * spread[0] * th.cos(), c[1] + 0.25 * spread[1] * th.sin()]);
    }
    let step = 0.1 * spread[0].max(spread[1]);
    let results: Vec<([f64; 2], f64)> = exec::map(seeds.len(), |k| nelder_mead(seeds[k], step, &f, 1e-6 * h));
    let best = results.into_iter().fold(([c[0], c[1]], f64::INFINITY), |b, r| if r.1 < b.1 { r } else { b });
    (best.0.to_vec(), best.1)
}

/// Mean-zero tolerance 1e−10·(1 + ‖φ‖₁).
pub fn mean_zero_tolerance(phi: &GridFunction) -> f64 {
    1e-10 * (1.0 + phi.l1())
}

pub fn membership(phi: &GridFunction, r: f64, a: f64, gamma: f64) -> Result<MembershipReport> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(crate::error::domain("r", format!("class radius {r} must be positive")));
    }
    if !(a >= 1.0) {
        return Err(crate::error::domain("A", format!("class constant {a} must be >= 1")));
    }
    let nd = phi.grid.n_dim;
    let (center, concentration) = best_center(phi, gamma);
    let l1 = phi.l1();
    let linf = phi.linf();
    let mean_residual = phi.integral().abs();
    let tolerance = mean_zero_tolerance(phi);
    let factor = l1.max(r.powi(nd as i32) / a * linf).max(r.powf(-gamma) * concentration);
    Ok(MembershipReport {
        r,
        a,
        gamma,
        center,
        mean_residual,
        concentration,
        linf,
        l1,
        factor,
        mean_zero_pass: mean_residual <= tolerance,
        tolerance,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub beta: f64,
    pub direct_seminorm: f64,
    pub band_estimate: f64,
    /// ‖f‖_∞ + direct_seminorm
    pub norm: f64,
    /// band_estimate / direct_seminorm (0 when the seminorm vanishes)
    pub band_ratio: f64,
    pub pairs_scanned: usize,
}

const PAIR_BUDGET: usize = 1 << 18;

/// Lags (in grid units) scanned by the direct estimator: every short lag,
/// then log-spaced lags up to R/2, within the pair budget.
fn lag_set(grid: &Grid) -> Vec<[isize; 2]> {
    let n = grid.n as isize;
    let max = (grid.n / 4).max(1) as isize;
    let per_lag = grid.len();
    let budget = (PAIR_BUDGET / per_lag).max(8);
    if grid.n_dim == 1 {
        if (max as usize) <= budget {
            return (1..=max).map(|l| [l, 0]).collect();
        }
        let dense = budget / 2;
        let mut v: Vec<isize> = (1..=dense as isize).collect();
        let rest = budget - dense;
        for k in 0..rest {
            let l = (dense as f64 * (max as f64 / dense as f64).powf((k + 1) as f64 / rest as f64)).round() as isize;
            if l > *v.last().unwrap() && l <= max {
                v.push(l);
            }
        }
        return v.into_iter().map(|l| [l, 0]).collect();
    }
    let mut v = Vec::new();
    for l1 in 0..=2isize {
        for l0 in -2..=2isize {
            if (l1 > 0 || l0 > 0) && l0 * l0 + l1 * l1 <= max * max {
                v.push([l0, l1]);
            }
        }
    }
    let dirs: [[isize; 2]; 4] = [[1, 0], [0, 1], [1, 1], [1, -1]];
    let radial = budget.saturating_sub(v.len()) / 4;
    for d in dirs {
        let lim = if d[0] != 0 && d[1] != 0 { (max as f64 / 2f64.sqrt()) as isize } else { max };
        for k in 0..radial {
            let l = (3.0 * (lim as f64 / 3.0).powf((k + 1) as f64 / radial.max(1) as f64)).round() as isize;
            let cand = [d[0] * l, d[1] * l];
            if l >= 3 && l <= lim && l < n && !v.contains(&cand) {
                v.push(cand);
            }
        }
    }
    v
}

fn direct_seminorm(f: &GridFunction, beta: f64) -> (f64, usize) {
    let g = f.grid;
    let h = g.h();
    let n = g.n as isize;
    let lags = lag_set(&g);
    let per: Vec<(f64, usize)> = exec::map(lags.len(), |k| {
        let l = lags[k];
        let dist = h * ((l[0] * l[0] + l[1] * l[1]) as f64).sqrt();
        if dist > g.radius / 2.0 + 1e-12 {
            return (0.0, 0);
        }
        let w = dist.powf(-beta);
        let mut m = 0.0f64;
        let mut count = 0;
        for i in 0..g.len() {
            let mi = g.unravel(i);
            let j0 = mi[0] as isize + l[0];
            let j1 = mi[1] as isize + l[1];
            if j0 < 0 || j0 >= n || (g.n_dim == 2 && (j1 < 0 || j1 >= n)) {
                continue;
            }
            let j = g.ravel([j0 as usize, j1.max(0) as usize]);
            m = m.max((f.values[i] - f.values[j]).abs());
            count += 1;
        }
        (m * w, count)
    });
    per.iter().fold((0.0, 0), |(a, c), (m, k)| (a.max(*m), c + k))
}

/// η(ξ) = 1 on |ξ| ≤ 1, 0 on |ξ| ≥ 2, raised cosine between.
fn eta(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * (r - 1.0)).cos())
    }
}

fn fft_nd(buf: &mut [Complex<f64>], nd: usize, n: usize, forward: bool) {
    let mut planner = FftPlanner::new();
    let plan = if forward { planner.plan_fft_forward(n) } else { planner.plan_fft_inverse(n) };
    if nd == 1 {
        plan.process(buf);
        return;
    }
    for row in buf.chunks_mut(n) {
        plan.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = buf[c + n * r];
        }
        plan.process(&mut col);
        for r in 0..n {
            buf[c + n * r] = col[r];
        }
    }
}

/// sup_j 2^{βj}‖Δ_j f‖_∞ over 2^{−j} ∈ [2h, R/4], sup over the inner 90% of the box.
fn band_estimate(f: &GridFunction, beta: f64) -> f64 {
    let g = f.grid;
    let n = g.n;
    let nd = g.n_dim;
    let h = g.h();
    let mut hat: Vec<Complex<f64>> = f.values.iter().map(|v| Complex::new(*v, 0.0)).collect();
    fft_nd(&mut hat, nd, n, true);
    let freq = |k: usize| -> f64 {
        let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        2.0 * PI * k / (2.0 * g.radius)
    };
    let xi: Vec<f64> = (0..g.len())
        .map(|i| {
            let m = g.unravel(i);
            if nd == 1 {
                freq(m[0]).abs()
            } else {
                freq(m[0]).hypot(freq(m[1]))
            }
        })
        .collect();
    let j_lo = (4.0 / g.radius).log2().ceil() as i32;
    let j_hi = (1.0 / (2.0 * h)).log2().floor() as i32;
    let inner: Vec<usize> = (0..g.len()).filter(|&i| g.inside(i, 0.9)).collect();
    let mut best = 0.0f64;
    for j in j_lo..=j_hi {
        let s = 2f64.powi(-j);
        let mut buf: Vec<Complex<f64>> = hat
            .iter()
            .zip(&xi)
            .map(|(c, &x)| c * (eta(s * x) - eta(2.0 * s * x)))
            .collect();
        fft_nd(&mut buf, nd, n, false);
        let norm = 1.0 / g.len() as f64;
        let sup = inner.iter().fold(0.0f64, |m, &i| m.max((buf[i].re * norm).abs()));
        best = best.max(2f64.powf(beta * j as f64) * sup);
    }
    best
}

pub fn holder_estimate(f: &GridFunction, beta: f64) -> Result<HolderEstimate> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(crate::error::domain("beta", format!("Hölder exponent {beta} must lie in (0, 1)")));
    }
    let (direct, pairs) = direct_seminorm(f, beta);
    let band = band_estimate(f, beta);
    Ok(HolderEstimate {
        beta,
        direct_seminorm: direct,
        band_estimate: band,
        norm: f.linf() + direct,
        band_ratio: if direct > 0.0 { band / direct } else { 0.0 },
        pairs_scanned: pairs,
    })
}

/// Direct seminorm only; the band filter is skipped.
pub fn holder_seminorm(f: &GridFunction, beta: f64) -> f64 {
    direct_seminorm(f, beta).0
}

/// ∫ w φ by grid quadrature.
pub fn pairing(w: &GridFunction, phi: &GridFunction) -> Result<f64> {
    w.dot(phi)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportReport {
    /// |∫w₀φ(t̄) − ∫w(t̄)φ₀| / (1 + ‖w₀‖₂‖φ₀‖₂)
    pub residual: f64,
    pub w0_phi_tbar: f64,
    pub w_tbar_phi0: f64,
    pub t_bar: f64,
    pub dt: f64,
    pub h: f64,
    pub steps: usize,
}

/// Forward solve of w with K and of φ with the backward kernel K^{(t̄)} on
/// [0, t̄]; both use the same step dt (shrunk so that t̄/dt is an integer).
pub fn verify_transport_duality(kernel: &Kernel, w0: &GridFunction, phi0: &GridFunction, t_bar: f64, dt: f64) -> Result<TransportReport> {
    w0.same_grid(phi0)?;
    if !(t_bar >= 0.0 && t_bar.is_finite()) {
        return Err(crate::error::domain("t_bar", format!("{t_bar} must be finite and >= 0")));
    }
    let steps = if t_bar == 0.0 { 0 } else { (t_bar / dt).ceil() as usize };
    let dt_used = if steps == 0 { dt } else { t_bar / steps as f64 };
    let (w_end, phi_end) = if steps == 0 {
        (w0.clone(), phi0.clone())
    } else {
        let back = kernel.backward(t_bar)?;
        let opts = SolveOptions { dt: Dt::Fixed(dt_used), snapshot_stride: usize::MAX, ..SolveOptions::default() };
        let wt = solver::solve_with(kernel, w0, t_bar, &opts)?;
        let pt = solver::solve_with(&back, phi0, t_bar, &opts)?;
        (wt.last().clone(), pt.last().clone())
    };
    let a = w0.dot(&phi_end)?;
    let b = w_end.dot(phi0)?;
    Ok(TransportReport {
        residual: (a - b).abs() / (1.0 + w0.l2() * phi0.l2()),
        w0_phi_tbar: a,
        w_tbar_phi0: b,
        t_bar,
        dt: dt_used,
        h: w0.grid.h(),
        steps,
    })
}

/// Smooth compact bump exp(−1/(1−|u|²)) of radius `width` at `center`,
/// normalised to unit discrete mass on the grid.
pub fn bump(grid: Grid, center: &[f64], width: f64, exterior: Exterior) -> Result<GridFunction> {
    let nd = grid.n_dim;
    let mut f = GridFunction::from_fn(grid, exterior, |x| {
        let mut u2 = 0.0;
        for a in 0..nd {
            u2 += ((x[a] - center[a]) / width).powi(2);
        }
        if u2 < 1.0 {
            (-1.0 / (1.0 - u2)).exp()
        } else {
            0.0
        }
    });
    let m = f.integral();
    if m <= 0.0 {
        return Err(Error::Precondition(format!("bump of width {width} at {center:?} misses every grid point")));
    }
    f.values.iter_mut().for_each(|v| *v /= m);
    Ok(f)
}

/// φ = weight·(ψ(x − c − d e₁) − ψ(x − c + d e₁)), ψ a unit-mass bump of
/// radius `width`; each copy is normalised separately so the discrete mean
/// vanishes to rounding.
pub fn double_bump(grid: Grid, center: &[f64], d: f64, width: f64, weight: f64) -> Result<GridFunction> {
    let nd = grid.n_dim;
    let mut p = center.to_vec();
    let mut q = center.to_vec();
    p[0] += d;
    q[0] -= d;
    let a = bump(grid, &p[..nd], width, Exterior::Zero)?;
    let b = bump(grid, &q[..nd], width, Exterior::Zero)?;
    let v = a.values.iter().zip(&b.values).map(|(x, y)| weight * (x - y)).collect();
    Ok(a.with_values(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_function_has_zero_factor() {
        let g = Grid::d1(128, 4.0);
        let m = membership(&GridFunction::zeros(g, Exterior::Zero), 0.5, 1.0, 0.3).unwrap();
        assert_eq!(m.factor, 0.0);
        assert!(m.mean_zero_pass);
    }

    #[test]
    fn constants_have_zero_seminorm() {
        let g = Grid::d1(256, 4.0);
        let h = holder_estimate(&GridFunction::constant(g, 2.5), 0.4).unwrap();
        assert_eq!(h.direct_seminorm, 0.0);
        assert!(h.band_estimate < 1e-12);
    }

    #[test]
    fn power_function_seminorm_is_one() {
        let beta = 0.4;
        let g = Grid::d1(2048, 4.0);
        // Shift so the origin is a grid point.
        let x0 = g.coord(1024);
        let f = GridFunction::from_fn(g, Exterior::Constant, |x| (x[0] - x0).abs().powf(beta).min(1.0));
        let h = holder_estimate(&f, beta).unwrap();
        assert!((h.direct_seminorm - 1.0).abs() < 0.05, "{}", h.direct_seminorm);
    }

    #[test]
    fn double_bump_is_mean_zero() {
        let g = Grid::d1(512, 4.0);
        let phi = double_bump(g, &[0.1], 0.5, 0.3, 0.5).unwrap();
        assert!(phi.integral().abs() < 1e-15);
        let m = membership(&phi, 0.5, 2.0, 0.3).unwrap();
        assert!(m.mean_zero_pass);
        assert!((m.l1 - 1.0).abs() < 1e-12);
        // The optimal centre of a symmetric pair is its midpoint region.
        assert!((m.center[0] - 0.1).abs() < 0.5 + 1e-9);
    }

    #[test]
    fn center_search_2d_finds_the_bump() {
        let g = Grid::new(2, 48, 3.0).unwrap();
        let f = bump(g, &[0.7, -0.4], 0.5, Exterior::Zero).unwrap();
        let (c, v) = best_center(&f, 0.5);
        assert!((c[0] - 0.7).abs() < 0.05 && (c[1] + 0.4).abs() < 0.05, "{c:?}");
        assert!(v <= concentration_at(&f, &[0.7, -0.4], 0.5) * (1.0 + 1e-6));
    }
}
