use super::{Extent, Kernel};
use crate::error::{domain, Error, Result};
use crate::grid::GridFunction;
use crate::quad::Gauss;
use std::sync::Arc;

impl Kernel {
    /// K^{(t̄)}(s, x, y) = K(t̄ − s, x, y). Times outside [0, t̄] clamp to the ends.
    pub fn backward(&self, t_bar: f64) -> Result<Kernel> {
        if !(t_bar.is_finite() && t_bar >= 0.0) {
            return Err(Error::Range(format!("t_bar = {t_bar} must be finite and >= 0")));
        }
        if t_bar > self.t_max {
            return Err(Error::Range(format!("t_bar = {t_bar} beyond the kernel's time range [0, {}]", self.t_max)));
        }
        if self.flags.time_independent {
            return Ok(self.clone());
        }
        if let Some((orig, tb)) = &self.reversed {
            if *tb == t_bar {
                return Ok((**orig).clone());
            }
        }
        let inner = self.clone();
        let f = move |s: f64, x: &[f64], z: &[f64]| inner.eval((t_bar - s).clamp(0.0, t_bar), x, z);
        Ok(Kernel {
            f: Arc::new(f),
            params: self.params,
            flags: self.flags,
            t_max: t_bar,
            name: format!("backward({}, {t_bar})", self.name),
            reversed: Some((Arc::new(self.clone()), t_bar)),
        })
    }

    /// k^ε(t, x, z) = k(ε^α t, εx, εz), i.e. K^ε(t,x,y) = ε^{N+α} K(ε^α t, εx, εy),
    /// together with w₀^ε(x) = w₀(εx) on the same grid. ζ, s₀ scale by 1/ε and
    /// τ by ε^ν.
    pub fn rescale(&self, w0: &GridFunction, eps: f64) -> Result<(Kernel, GridFunction)> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(domain("eps", format!("eps = {eps} must lie in (0, 1]")));
        }
        if eps == 1.0 {
            return Ok((self.clone(), w0.clone()));
        }
        let mut params = self.params;
        params.zeta = params.zeta.scale(1.0 / eps);
        if let Some(h) = params.high_order.as_mut() {
            h.s0 = h.s0.scale(1.0 / eps);
            h.tau *= eps.powf(h.nu);
        }
        let ta = eps.powf(self.params.alpha);
        let inner = self.clone();
        let f = move |t: f64, x: &[f64], z: &[f64]| {
            let mut xs = [0.0; 2];
            let mut zs = [0.0; 2];
            let n = x.len();
            for i in 0..n {
                xs[i] = eps * x[i];
                zs[i] = eps * z[i];
            }
            inner.eval(ta * t, &xs[..n], &zs[..n])
        };
        let k = Kernel {
            f: Arc::new(f),
            params,
            flags: self.flags,
            t_max: self.t_max / ta,
            name: format!("rescale({}, {eps})", self.name),
            reversed: None,
        };
        let w = w0.resample(|x| x.iter().map(|v| eps * v).collect());
        Ok((k, w))
    }

    /// Mollified truncation h_ε = h^ε ∗ Φ_ε with h^ε = h on {|x−y| < 1/ε, t ≤ min(1/ε, T)}
    /// and Λ⁻¹ elsewhere; Φ_ε is the tensor bump over (t, x, y).
    /// The result carries ζ/2, 2Λ and (for α ≥ 1) s₀/2 capped at 1/(4ε).
    pub fn mollify(&self, eps: f64) -> Result<Kernel> {
        let p = self.params;
        if !(eps > 0.0) {
            return Err(domain("eps", format!("eps = {eps} must be > 0")));
        }
        if eps > p.zeta.value() / 4.0 {
            return Err(Error::Precondition(format!("eps = {eps} too large for zeta = {:?} (need eps <= zeta/4)", p.zeta)));
        }
        if let Some(h) = p.high_order {
            if eps > h.s0.value() / 4.0 {
                return Err(Error::Precondition(format!("eps = {eps} too large for s0 = {:?} (need eps <= s0/4)", h.s0)));
            }
        }
        let n = p.n;
        let m = if n == 1 { 6 } else { 4 };
        let g = Gauss::new(m);
        let mut nodes: Vec<(f64, f64)> = g
            .nodes
            .iter()
            .zip(&g.weights)
            .map(|(&u, &w)| (u, w * (-1.0 / (1.0 - u * u)).exp()))
            .collect();
        let total: f64 = nodes.iter().map(|v| v.1).sum();
        for v in nodes.iter_mut() {
            v.1 /= total;
        }
        let mut out = p;
        out.zeta = p.zeta.scale(0.5);
        out.lambda = 2.0 * p.lambda;
        if let Some(h) = out.high_order.as_mut() {
            let cap = 1.0 / (4.0 * eps);
            h.s0 = Extent::Finite((h.s0.value() * 0.5).min(cap));
        }
        let inner = self.clone();
        let t_cut = (1.0 / eps).min(self.t_max);
        let floor = 1.0 / p.lambda;
        let cut = 1.0 / eps;
        let f = move |t: f64, x: &[f64], z: &[f64]| -> f64 {
            let h = |tt: f64, xx: &[f64], yy: &[f64]| -> f64 {
                let mut zz = [0.0; 2];
                for i in 0..n {
                    zz[i] = yy[i] - xx[i];
                }
                if super::norm(&zz[..n]) >= cut || tt > t_cut {
                    floor
                } else {
                    inner.eval(tt.max(0.0), xx, &zz[..n])
                }
            };
            let mut acc = 0.0;
            if n == 1 {
                for &(a, wa) in &nodes {
                    let tt = t - eps * a;
                    for &(b, wb) in &nodes {
                        let xx = [x[0] - eps * b];
                        for &(c, wc) in &nodes {
                            let yy = [x[0] + z[0] - eps * c];
                            acc += wa * wb * wc * h(tt, &xx, &yy);
                        }
                    }
                }
            } else {
                let y = [x[0] + z[0], x[1] + z[1]];
                for &(a, wa) in &nodes {
                    let tt = t - eps * a;
                    for &(b1, w1) in &nodes {
                        for &(b2, w2) in &nodes {
                            let xx = [x[0] - eps * b1, x[1] - eps * b2];
                            for &(c1, w3) in &nodes {
                                for &(c2, w4) in &nodes {
                                    let yy = [y[0] - eps * c1, y[1] - eps * c2];
                                    acc += wa * w1 * w2 * w3 * w4 * h(tt, &xx, &yy);
                                }
                            }
                        }
                    }
                }
            }
            acc
        };
        let mut flags = self.flags;
        flags.time_independent = false;
        flags.smooth = true;
        Ok(Kernel {
            f: Arc::new(f),
            params: out,
            flags,
            t_max: self.t_max,
            name: format!("mollify({}, {eps})", self.name),
            reversed: None,
        })
    }
}
