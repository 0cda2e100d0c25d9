//! Discrete weights of the operator on a grid.
//!
//! (T f)_i = Σ_j W_ij (f_i − f_j) + near-field edges + exterior terms.
//!
//! * Far field: cells with |m|_∞ ≥ 2, W_ij = ½(k(x_i, z) + k(x_j, −z))·∫_cell |z|^{−N−α}.
//! * Near field: the 3^N block around x_i in divergence form, with edge
//!   weights from the second moments M2 = ∫_block z⊗z k |z|^{−N−α}.
//! * Exterior: ray integrals ∫_a^∞ k(x, sσ) s^{−1−α} ds beyond the box.

use super::fft::FftConv;
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{Exterior, Grid};
use crate::kernels::Kernel;
use crate::quad::{g16, g4, g6, g8, Gauss};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Far-field storage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    /// Toeplitz for translation-invariant kernels, dense up to 2048 points,
    /// otherwise recomputed on every application.
    #[default]
    Auto,
    Dense,
    Toeplitz,
    OnTheFly,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PlanOptions {
    #[serde(default)]
    pub storage: Storage,
    /// FFT correlation for Toeplitz far fields; default on above 4096 points.
    #[serde(default)]
    pub fft: Option<bool>,
}

impl PlanOptions {
    /// Every term summed pairwise in a fixed order (no FFT).
    pub fn pairwise() -> Self {
        PlanOptions { storage: Storage::Auto, fft: Some(false) }
    }
}

pub(crate) const DENSE_LIMIT: usize = 2048;
pub(crate) const FFT_THRESHOLD: usize = 4096;

pub(crate) enum Far {
    Toeplitz { lag: Vec<f64>, fft: Option<Arc<FftConv>> },
    Dense { w: Vec<f64> },
    OnTheFly { kernel: Kernel, cm: Arc<Vec<f64>> },
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ExtEntry {
    pub node: u32,
    pub w: f64,
    pub err: f64,
}

pub struct OperatorPlan {
    pub grid: Grid,
    pub t: f64,
    pub exterior: Exterior,
    pub alpha: f64,
    /// Half-width of the near-field block.
    pub rho: f64,
    pub(crate) far: Far,
    pub(crate) far_rowsum: Vec<f64>,
    pub(crate) near_axis: [Vec<f64>; 2],
    pub(crate) near_diag: [Vec<f64>; 2],
    /// Total exterior weight under the zero rule, ghost edges included.
    pub tail: Vec<f64>,
    pub tail_err: Vec<f64>,
    pub(crate) ext: Vec<Vec<ExtEntry>>,
    pub(crate) m2: [Vec<f64>; 3],
    pub(crate) m4: [Vec<f64>; 2],
    pub(crate) m1: [Vec<f64>; 2],
    /// D_i: total weight on node i; dt ≤ 0.5/max D keeps the update convex.
    pub row_sum: Vec<f64>,
    pub(crate) translation_invariant: bool,
    pub(crate) offsets: Vec<[f64; 2]>,
}

/// ∫_cell |z|^{−N−α} dz for the cell centred at m h, indexed by |m| (axis 0 fastest).
pub(crate) fn cell_moments(grid: &Grid, alpha: f64) -> Vec<f64> {
    let n = grid.n;
    let h = grid.h();
    if grid.n_dim == 1 {
        (0..n)
            .map(|m| {
                if m < 2 {
                    0.0
                } else {
                    let a = m as f64 - 0.5;
                    let b = m as f64 + 0.5;
                    (a.powf(-alpha) - b.powf(-alpha)) * h.powf(-alpha) / alpha
                }
            })
            .collect()
    } else {
        let p = 2.0 + alpha;
        let mut out = vec![0.0; n * n];
        for m1 in 0..n {
            for m0 in 0..=m1 {
                if m1 < 2 {
                    continue;
                }
                let rule: &Gauss = if m1 <= 6 {
                    g6()
                } else if m1 <= 16 {
                    g4()
                } else {
                    g4()
                };
                let mut acc = 0.0;
                let (c0, c1) = (m0 as f64 * h, m1 as f64 * h);
                for (u, wu) in rule.on(c0 - h / 2.0, c0 + h / 2.0) {
                    for (v, wv) in rule.on(c1 - h / 2.0, c1 + h / 2.0) {
                        acc += wu * wv * (u * u + v * v).powf(-p / 2.0);
                    }
                }
                out[m0 + n * m1] = acc;
                out[m1 + n * m0] = acc;
            }
        }
        out
    }
}

/// Centroid offset of the weight |z|^{−N−α} inside each cell, relative to
/// the cell centre, for non-negative offsets m (components ≤ 0). The
/// midpoint rule misses ∇f(y_j)·offset·W_ij per cell.
pub(crate) fn cell_offsets(grid: &Grid, alpha: f64) -> Vec<[f64; 2]> {
    let n = grid.n;
    let h = grid.h();
    let p = grid.n_dim as f64 + alpha;
    if grid.n_dim == 1 {
        return (0..n)
            .map(|m| {
                if m < 2 {
                    return [0.0, 0.0];
                }
                let c = m as f64 * h;
                let (mut w0, mut w1) = (0.0, 0.0);
                for (u, w) in g16().on(c - h / 2.0, c + h / 2.0) {
                    let v = w * u.powf(-p);
                    w0 += v;
                    w1 += v * (u - c);
                }
                [w1 / w0, 0.0]
            })
            .collect();
    }
    let mut out = vec![[0.0, 0.0]; n * n];
    for m1 in 0..n {
        for m0 in 0..n {
            if m0.max(m1) < 2 {
                continue;
            }
            let (c0, c1) = (m0 as f64 * h, m1 as f64 * h);
            let (mut w0, mut wa, mut wb) = (0.0, 0.0, 0.0);
            for (u, wu) in g6().on(c0 - h / 2.0, c0 + h / 2.0) {
                for (v, wv) in g6().on(c1 - h / 2.0, c1 + h / 2.0) {
                    let q = wu * wv * (u * u + v * v).powf(-p / 2.0);
                    w0 += q;
                    wa += q * (u - c0);
                    wb += q * (v - c1);
                }
            }
            out[m0 + n * m1] = [wa / w0, wb / w0];
        }
    }
    out
}

#[inline]
fn cm_at(cm: &[f64], n_dim: usize, n: usize, d0: usize, d1: usize) -> f64 {
    if n_dim == 1 {
        cm[d0]
    } else {
        cm[d0 + n * d1]
    }
}

/// ∫_a^∞ F(s) s^{−1−α} ds: `panels` doublings in log s, then s = A u^{−1/α}.
/// Returns (value with `hi`, value with `lo`).
pub(crate) fn ray_integral<F: Fn(f64) -> f64>(a: f64, alpha: f64, panels: usize, lo: &Gauss, hi: &Gauss, f: F) -> (f64, f64) {
    let mut out = [0.0, 0.0];
    let ln2 = std::f64::consts::LN_2;
    for (k, rule) in [hi, lo].into_iter().enumerate() {
        let mut acc = 0.0;
        for p in 0..panels {
            let v0 = a.ln() + p as f64 * ln2;
            for (v, w) in rule.on(v0, v0 + ln2) {
                let s = v.exp();
                acc += w * f(s) * s.powf(-alpha);
            }
        }
        let big = a * 2f64.powi(panels as i32);
        let mut rem = 0.0;
        for (u, w) in rule.on(0.0, 1.0) {
            rem += w * f(big * u.powf(-1.0 / alpha));
        }
        acc += rem * big.powf(-alpha) / alpha;
        out[k] = acc;
    }
    (out[0], out[1])
}

#[derive(Clone, Copy, Default)]
struct NearMoments {
    m2: [f64; 3],
    m4: [f64; 2],
    m1: [f64; 2],
}

fn near_moments(kernel: &Kernel, t: f64, x: &[f64], rho: f64) -> NearMoments {
    let alpha = kernel.params.alpha;
    let nu = if alpha >= 1.0 { kernel.params.nu().unwrap_or(alpha - 0.5) } else { 0.0 };
    let q = 1.0 / (1.0 - alpha + nu);
    let e2 = 1.0 / (2.0 - alpha);
    let e4 = 1.0 / (4.0 - alpha);
    let rule = g16();
    let mut out = NearMoments::default();
    if x.len() == 1 {
        let (mut a2, mut a4, mut a1) = (0.0, 0.0, 0.0);
        for (u, w) in rule.on(0.0, 1.0) {
            let s = rho * u.powf(e2);
            a2 += w * (kernel.eval(t, x, &[s]) + kernel.eval(t, x, &[-s]));
            let s = rho * u.powf(e4);
            a4 += w * (kernel.eval(t, x, &[s]) + kernel.eval(t, x, &[-s]));
            let s = rho * u.powf(q);
            a1 += w * (kernel.eval(t, x, &[s]) - kernel.eval(t, x, &[-s])) / s.powf(nu);
        }
        out.m2[0] = a2 * rho.powf(2.0 - alpha) * e2;
        out.m4[0] = a4 * rho.powf(4.0 - alpha) * e4;
        out.m1[0] = a1 * q * rho.powf(1.0 - alpha + nu);
        return out;
    }
    let ang = g6();
    for oct in 0..8 {
        let th0 = oct as f64 * PI / 4.0;
        for (th, wt) in ang.on(th0, th0 + PI / 4.0) {
            let (sn, cs) = th.sin_cos();
            let rt = rho / cs.abs().max(sn.abs());
            let (mut a2, mut a4, mut a1) = (0.0, 0.0, 0.0);
            for (u, w) in rule.on(0.0, 1.0) {
                let s = rt * u.powf(e2);
                a2 += w * kernel.eval(t, x, &[s * cs, s * sn]);
                let s = rt * u.powf(e4);
                a4 += w * kernel.eval(t, x, &[s * cs, s * sn]);
                if oct < 4 {
                    let s = rt * u.powf(q);
                    a1 += w * (kernel.eval(t, x, &[s * cs, s * sn]) - kernel.eval(t, x, &[-s * cs, -s * sn])) / s.powf(nu);
                }
            }
            let r2 = wt * a2 * rt.powf(2.0 - alpha) * e2;
            out.m2[0] += r2 * cs * cs;
            out.m2[1] += r2 * sn * sn;
            out.m2[2] += r2 * cs * sn;
            let r4 = wt * a4 * rt.powf(4.0 - alpha) * e4;
            out.m4[0] += r4 * cs.powi(4);
            out.m4[1] += r4 * sn.powi(4);
            if oct < 4 {
                let r1 = wt * a1 * q * rt.powf(1.0 - alpha + nu);
                out.m1[0] += r1 * cs;
                out.m1[1] += r1 * sn;
            }
        }
    }
    out
}

/// Rays leaving the box from x: (direction, start distance, angular weight).
/// The start is the exit distance, but never inside the near-field block.
pub(crate) fn exterior_rays(grid: &Grid, x: &[f64; 2], rho: f64) -> Vec<([f64; 2], f64, f64)> {
    let r = grid.radius;
    if grid.n_dim == 1 {
        return [-1.0f64, 1.0]
            .into_iter()
            .map(|sgn| ([sgn, 0.0], (r - sgn * x[0]).max(rho), 1.0))
            .collect();
    }
    let rays = 64;
    (0..rays)
        .map(|j| {
            let th = 2.0 * PI * (j as f64 + 0.5) / rays as f64;
            let (sn, cs) = th.sin_cos();
            let sig = [cs, sn];
            let mut d = f64::INFINITY;
            for ax in 0..2 {
                d = d.min((r - x[ax] * sig[ax].signum()) / sig[ax].abs());
            }
            (sig, d.max(rho / cs.abs().max(sn.abs())), 2.0 * PI / rays as f64)
        })
        .collect()
}

struct Exterior1 {
    tail: f64,
    tail_err: f64,
    ext: Vec<ExtEntry>,
}

impl OperatorPlan {
    pub fn build(kernel: &Kernel, grid: Grid, t: f64, exterior: Exterior, opts: &PlanOptions) -> Result<Self> {
        let p = kernel.params;
        if p.n != grid.n_dim {
            return Err(Error::Shape(format!("kernel dimension {} vs grid dimension {}", p.n, grid.n_dim)));
        }
        if p.alpha >= 1.0 && p.high_order.is_none() {
            return Err(Error::Unsupported(
                "alpha >= 1 needs the cancellation parameters (nu, s0, tau) for the principal value".into(),
            ));
        }
        let nd = grid.n_dim;
        let n = grid.n;
        let ntot = grid.len();
        let h = grid.h();
        let rho = 1.5 * h;
        let alpha = p.alpha;
        let ti = kernel.flags.translation_invariant;
        let cm = Arc::new(cell_moments(&grid, alpha));

        // Near-field moments.
        let moments: Vec<NearMoments> = if ti {
            let m = near_moments(kernel, t, &[0.0, 0.0][..nd], rho);
            vec![m; ntot]
        } else {
            exec::map(ntot, |i| near_moments(kernel, t, &grid.point(i)[..nd], rho))
        };

        // Far field.
        let storage = match opts.storage {
            Storage::Auto if ti => Storage::Toeplitz,
            Storage::Auto if ntot <= DENSE_LIMIT => Storage::Dense,
            Storage::Auto => Storage::OnTheFly,
            Storage::Toeplitz if !ti => {
                return Err(Error::Precondition("Toeplitz storage needs a translation-invariant kernel".into()));
            }
            s => s,
        };
        let span = 2 * n - 1;
        let (far, far_rowsum) = match storage {
            Storage::Toeplitz => {
                let len = span.pow(nd as u32);
                let zero = [0.0, 0.0];
                let lag: Vec<f64> = exec::map(len, |k| {
                    let m0 = (k % span) as isize - (n as isize - 1);
                    let m1 = if nd == 2 { (k / span) as isize - (n as isize - 1) } else { 0 };
                    let (a0, a1) = (m0.unsigned_abs(), m1.unsigned_abs());
                    if a0.max(a1) < 2 {
                        return 0.0;
                    }
                    let z = [m0 as f64 * h, m1 as f64 * h];
                    let mz = [-z[0], -z[1]];
                    0.5 * (kernel.eval(t, &zero[..nd], &z[..nd]) + kernel.eval(t, &zero[..nd], &mz[..nd])) * cm_at(&cm, nd, n, a0, a1)
                });
                // Window sums of the lag table by (2D) prefix sums.
                let w = span + 1;
                let mut pre = vec![0.0; w.pow(nd as u32)];
                if nd == 1 {
                    for k in 0..span {
                        pre[k + 1] = pre[k] + lag[k];
                    }
                } else {
                    for k1 in 0..span {
                        for k0 in 0..span {
                            pre[(k0 + 1) + w * (k1 + 1)] =
                                lag[k0 + span * k1] + pre[k0 + w * (k1 + 1)] + pre[(k0 + 1) + w * k1] - pre[k0 + w * k1];
                        }
                    }
                }
                let rowsum: Vec<f64> = exec::map(ntot, |i| {
                    let mi = grid.unravel(i);
                    let a0 = n - 1 - mi[0];
                    if nd == 1 {
                        pre[a0 + n] - pre[a0]
                    } else {
                        let a1 = n - 1 - mi[1];
                        let at = |x: usize, y: usize| pre[x + w * y];
                        at(a0 + n, a1 + n) - at(a0, a1 + n) - at(a0 + n, a1) + at(a0, a1)
                    }
                });
                let use_fft = opts.fft.unwrap_or(ntot > FFT_THRESHOLD);
                let fft = if use_fft { Some(Arc::new(FftConv::new(nd, n, &lag))) } else { None };
                (Far::Toeplitz { lag, fft }, rowsum)
            }
            Storage::Dense => {
                let mut w = vec![0.0; ntot * ntot];
                exec::chunks_mut(&mut w, ntot, |i, row| {
                    let xi = grid.point(i);
                    let mi = grid.unravel(i);
                    for (j, slot) in row.iter_mut().enumerate() {
                        *slot = far_weight(kernel, t, &grid, &cm, j, &xi, mi);
                    }
                });
                let rowsum = exec::map(ntot, |i| w[i * ntot..(i + 1) * ntot].iter().sum());
                (Far::Dense { w }, rowsum)
            }
            Storage::OnTheFly | Storage::Auto => {
                let rowsum = exec::map(ntot, |i| {
                    let xi = grid.point(i);
                    let mi = grid.unravel(i);
                    (0..ntot).map(|j| far_weight(kernel, t, &grid, &cm, j, &xi, mi)).sum()
                });
                (Far::OnTheFly { kernel: kernel.clone(), cm: cm.clone() }, rowsum)
            }
        };

        // Near-field edges.
        let mut near_axis = [vec![0.0; ntot], vec![0.0; ntot]];
        let mut near_diag = [vec![0.0; ntot], vec![0.0; ntot]];
        let mut ghost = vec![0.0; ntot];
        let mut ghost_ext: Vec<Vec<ExtEntry>> = vec![Vec::new(); ntot];
        let inv2h2 = 1.0 / (2.0 * h * h);
        let inv4h2 = 1.0 / (4.0 * h * h);
        for i in 0..ntot {
            let mi = grid.unravel(i);
            for a in 0..nd {
                if mi[a] + 1 < n {
                    let mut mj = mi;
                    mj[a] += 1;
                    let j = grid.ravel(mj);
                    near_axis[a][i] = 0.5 * (moments[i].m2[a] + moments[j].m2[a]) * inv2h2;
                }
                if mi[a] == 0 || mi[a] + 1 == n {
                    ghost[i] += moments[i].m2[a] * inv2h2;
                }
            }
            if nd == 2 {
                for (d, s1) in [(0usize, 1isize), (1, -1)] {
                    let sign = s1 as f64;
                    let j0 = mi[0] as isize + 1;
                    let j1 = mi[1] as isize + s1;
                    if j0 < n as isize && j1 >= 0 && j1 < n as isize {
                        let j = grid.ravel([j0 as usize, j1 as usize]);
                        near_diag[d][i] = sign * 0.5 * (moments[i].m2[2] + moments[j].m2[2]) * inv4h2;
                    }
                }
                // Ghost diagonals: the four (±1, ±1) neighbours that fall outside.
                for (s0, s1) in [(1isize, 1isize), (-1, -1), (1, -1), (-1, 1)] {
                    let j0 = mi[0] as isize + s0;
                    let j1 = mi[1] as isize + s1;
                    let outside = j0 < 0 || j0 >= n as isize || j1 < 0 || j1 >= n as isize;
                    if outside {
                        let w = (s0 * s1) as f64 * moments[i].m2[2] * inv4h2;
                        ghost[i] += w;
                        let c = grid.ravel([j0.clamp(0, n as isize - 1) as usize, j1.clamp(0, n as isize - 1) as usize]);
                        if c != i && w != 0.0 {
                            ghost_ext[i].push(ExtEntry { node: c as u32, w, err: 0.0 });
                        }
                    }
                }
            }
        }

        // Exterior rays.
        let r = grid.radius;
        let ext1: Vec<Exterior1> = exec::map(ntot, |i| {
            let x = grid.point(i);
            if nd == 1 {
                let mut tail = 0.0;
                let mut err = 0.0;
                let mut ext = Vec::new();
                for (sgn, node) in [(-1.0f64, 0usize), (1.0, n - 1)] {
                    let d = r - sgn * x[0];
                    let a = d.max(rho);
                    let (v, v_lo) = ray_integral(a, alpha, 40, g8(), g16(), |s| kernel.eval(t, &x[..1], &[sgn * s]));
                    tail += v;
                    let e = (v - v_lo).abs();
                    err += e;
                    if node != i {
                        ext.push(ExtEntry { node: node as u32, w: v, err: e });
                    }
                }
                Exterior1 { tail, tail_err: err, ext }
            } else {
                let rays = 64;
                let wr = 2.0 * PI / rays as f64;
                let mut tail = 0.0;
                let mut err = 0.0;
                let mut ext: Vec<ExtEntry> = Vec::new();
                for j in 0..rays {
                    let th = 2.0 * PI * (j as f64 + 0.5) / rays as f64;
                    let (sn, cs) = th.sin_cos();
                    let sig = [cs, sn];
                    let mut d = f64::INFINITY;
                    let mut hit = 0usize;
                    for ax in 0..2 {
                        if sig[ax] != 0.0 {
                            let dd = (r - x[ax] * sig[ax].signum()) / sig[ax].abs();
                            if dd < d {
                                d = dd;
                                hit = ax;
                            }
                        }
                    }
                    let a = d.max(rho / cs.abs().max(sn.abs()));
                    let (v, v_lo) = ray_integral(a, alpha, 24, g4(), g8(), |s| kernel.eval(t, &x[..2], &[s * cs, s * sn]));
                    let v = v * wr;
                    let e = (v - v_lo * wr).abs();
                    tail += v;
                    err += e;
                    // Exit point and linear weights along the face it crosses.
                    let other = 1 - hit;
                    let fixed = if sig[hit] > 0.0 { n - 1 } else { 0 };
                    let pos = x[other] + d * sig[other];
                    let sidx = ((pos + r) / h - 0.5).clamp(0.0, (n - 1) as f64);
                    let k0 = (sidx.floor() as usize).min(n - 2);
                    let fr = sidx - k0 as f64;
                    for (k, lam) in [(k0, 1.0 - fr), (k0 + 1, fr)] {
                        if lam == 0.0 {
                            continue;
                        }
                        let mut mm = [0usize; 2];
                        mm[hit] = fixed;
                        mm[other] = k;
                        let node = grid.ravel(mm);
                        if node != i {
                            ext.push(ExtEntry { node: node as u32, w: v * lam, err: e * lam });
                        }
                    }
                }
                ext.sort_by_key(|e| e.node);
                let mut merged: Vec<ExtEntry> = Vec::with_capacity(ext.len());
                for e in ext {
                    match merged.last_mut() {
                        Some(l) if l.node == e.node => {
                            l.w += e.w;
                            l.err += e.err;
                        }
                        _ => merged.push(e),
                    }
                }
                Exterior1 { tail, tail_err: err, ext: merged }
            }
        });

        let mut tail = vec![0.0; ntot];
        let mut tail_err = vec![0.0; ntot];
        let mut ext = vec![Vec::new(); ntot];
        for (i, e) in ext1.into_iter().enumerate() {
            tail[i] = e.tail + ghost[i];
            tail_err[i] = e.tail_err;
            let mut v = e.ext;
            v.extend(ghost_ext[i].iter().copied());
            ext[i] = v;
        }

        let mut plan = OperatorPlan {
            grid,
            t,
            exterior,
            alpha,
            rho,
            far,
            far_rowsum,
            near_axis,
            near_diag,
            tail,
            tail_err,
            ext,
            m2: [
                moments.iter().map(|m| m.m2[0]).collect(),
                moments.iter().map(|m| m.m2[1]).collect(),
                moments.iter().map(|m| m.m2[2]).collect(),
            ],
            m4: [moments.iter().map(|m| m.m4[0]).collect(), moments.iter().map(|m| m.m4[1]).collect()],
            m1: [moments.iter().map(|m| m.m1[0]).collect(), moments.iter().map(|m| m.m1[1]).collect()],
            row_sum: Vec::new(),
            translation_invariant: ti,
            offsets: cell_offsets(&grid, alpha),
        };
        plan.row_sum = (0..ntot)
            .map(|i| {
                let mut s = plan.far_rowsum[i];
                plan.for_near(i, |_, w| s += w.abs());
                match exterior {
                    Exterior::Zero => s += plan.tail[i],
                    Exterior::Constant => {
                        for e in &plan.ext[i] {
                            s += e.w.abs();
                        }
                    }
                }
                s
            })
            .collect();
        Ok(plan)
    }

    /// Visit the near-field neighbours of node i with their edge weights.
    #[inline]
    pub(crate) fn for_near<F: FnMut(usize, f64)>(&self, i: usize, mut f: F) {
        let g = &self.grid;
        let n = g.n;
        let mi = g.unravel(i);
        for a in 0..g.n_dim {
            if mi[a] + 1 < n {
                let mut mj = mi;
                mj[a] += 1;
                f(g.ravel(mj), self.near_axis[a][i]);
            }
            if mi[a] > 0 {
                let mut mj = mi;
                mj[a] -= 1;
                let j = g.ravel(mj);
                f(j, self.near_axis[a][j]);
            }
        }
        if g.n_dim == 2 {
            // (+1,+1) and (−1,−1) on diagonal 0; (+1,−1) and (−1,+1) on diagonal 1.
            let (i0, i1) = (mi[0], mi[1]);
            if i0 + 1 < n && i1 + 1 < n {
                f(g.ravel([i0 + 1, i1 + 1]), self.near_diag[0][i]);
            }
            if i0 > 0 && i1 > 0 {
                let j = g.ravel([i0 - 1, i1 - 1]);
                f(j, self.near_diag[0][j]);
            }
            if i0 + 1 < n && i1 > 0 {
                f(g.ravel([i0 + 1, i1 - 1]), self.near_diag[1][i]);
            }
            if i0 > 0 && i1 + 1 < n {
                let j = g.ravel([i0 - 1, i1 + 1]);
                f(j, self.near_diag[1][j]);
            }
        }
    }

    pub fn max_row_sum(&self) -> f64 {
        self.row_sum.iter().copied().fold(0.0, f64::max)
    }

    /// True when the linear application goes through the FFT.
    pub fn uses_fft(&self) -> bool {
        matches!(&self.far, Far::Toeplitz { fft: Some(_), .. })
    }

    pub fn storage(&self) -> Storage {
        match &self.far {
            Far::Toeplitz { .. } => Storage::Toeplitz,
            Far::Dense { .. } => Storage::Dense,
            Far::OnTheFly { .. } => Storage::OnTheFly,
        }
    }

    /// Σ_j W_ij o_ij·∇f_j, o_ij the centroid offset of cell j seen from i.
    pub(crate) fn far_first_moment(&self, grad: &[Vec<f64>]) -> Vec<f64> {
        let g = self.grid;
        let ntot = g.len();
        let nd = g.n_dim;
        let n = g.n;
        exec::map(ntot, |i| {
            let mi = g.unravel(i);
            let mut s = [0.0, 0.0];
            for j in 0..ntot {
                let w = self.far_weight(i, j);
                if w == 0.0 {
                    continue;
                }
                let mj = g.unravel(j);
                let d0 = mi[0].abs_diff(mj[0]);
                let d1 = mi[1].abs_diff(mj[1]);
                let o = self.offsets[if nd == 1 { d0 } else { d0 + n * d1 }];
                for a in 0..nd {
                    let sg = if mj[a] >= mi[a] { 1.0 } else { -1.0 };
                    s[a] += w * sg * o[a] * grad[a][j];
                }
            }
            s[0].abs() + s[1].abs()
        })
    }

    /// Far-field weight W_ij.
    #[inline]
    pub fn far_weight(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        match &self.far {
            Far::Toeplitz { lag, .. } => {
                let n = g.n;
                let span = 2 * n - 1;
                let mi = g.unravel(i);
                let mj = g.unravel(j);
                let k0 = mj[0] + n - 1 - mi[0];
                let k1 = if g.n_dim == 2 { mj[1] + n - 1 - mi[1] } else { 0 };
                lag[k0 + span * k1]
            }
            Far::Dense { w } => w[i * g.len() + j],
            Far::OnTheFly { kernel, cm } => {
                far_weight(kernel, self.t, g, cm, j, &g.point(i), g.unravel(i))
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn far_weight(kernel: &Kernel, t: f64, grid: &Grid, cm: &[f64], j: usize, xi: &[f64; 2], mi: [usize; 2]) -> f64 {
    let nd = grid.n_dim;
    let mj = grid.unravel(j);
    let d0 = mi[0].abs_diff(mj[0]);
    let d1 = mi[1].abs_diff(mj[1]);
    if d0.max(d1) < 2 {
        return 0.0;
    }
    let xj = grid.point(j);
    let z = [xj[0] - xi[0], xj[1] - xi[1]];
    let mz = [xi[0] - xj[0], xi[1] - xj[1]];
    0.5 * (kernel.eval(t, &xi[..nd], &z[..nd]) + kernel.eval(t, &xj[..nd], &mz[..nd])) * cm_at(cm, nd, grid.n, d0, d1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_integral_of_constant_is_exact() {
        let (v, lo) = ray_integral(0.3, 0.7, 40, g8(), g16(), |_| 2.0);
        let exact = 2.0 * 0.3f64.powf(-0.7) / 0.7;
        assert!((v - exact).abs() < 1e-12 * exact);
        assert!((v - lo).abs() < 1e-12 * exact);
    }

    #[test]
    fn cell_moments_sum_to_tail_1d() {
        let g = Grid::d1(64, 8.0);
        let alpha = 0.5;
        let cm = cell_moments(&g, alpha);
        let s: f64 = cm.iter().sum();
        let h = g.h();
        let exact = ((1.5 * h).powf(-alpha) - ((64.0 - 0.5) * h).powf(-alpha)) / alpha;
        assert!((s - exact).abs() < 1e-12 * exact);
    }
}
