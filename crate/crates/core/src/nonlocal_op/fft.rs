//! Zero-padded FFT correlation with a symmetric lag table, for
//! translation-invariant far fields on large grids.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) struct FftConv {
    n_dim: usize,
    n: usize,
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    w_hat: Vec<Complex<f64>>,
}

impl FftConv {
    /// `lag` holds w[m] for m in [−(n−1), n−1]^N, axis 0 fastest, stride 2n−1.
    pub fn new(n_dim: usize, n: usize, lag: &[f64]) -> Self {
        let len = 2 * n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let span = 2 * n - 1;
        let wrap = |m: isize| -> usize { m.rem_euclid(len as isize) as usize };
        let mut buf = vec![Complex::new(0.0, 0.0); len.pow(n_dim as u32)];
        if n_dim == 1 {
            for (k, w) in lag.iter().enumerate() {
                let m = k as isize - (n as isize - 1);
                buf[wrap(m)] = Complex::new(*w, 0.0);
            }
        } else {
            for k1 in 0..span {
                for k0 in 0..span {
                    let m0 = k0 as isize - (n as isize - 1);
                    let m1 = k1 as isize - (n as isize - 1);
                    buf[wrap(m0) + len * wrap(m1)] = Complex::new(lag[k0 + span * k1], 0.0);
                }
            }
        }
        let mut c = FftConv { n_dim, n, len, fwd, inv, w_hat: Vec::new() };
        c.transform(&mut buf, true);
        c.w_hat = buf;
        c
    }

    fn transform(&self, buf: &mut [Complex<f64>], forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let len = self.len;
        if self.n_dim == 1 {
            plan.process(buf);
            return;
        }
        for row in buf.chunks_mut(len) {
            plan.process(row);
        }
        let mut col = vec![Complex::new(0.0, 0.0); len];
        for c in 0..len {
            for r in 0..len {
                col[r] = buf[c + len * r];
            }
            plan.process(&mut col);
            for r in 0..len {
                buf[c + len * r] = col[r];
            }
        }
    }

    /// out_i = Σ_j w[j − i] f_j.
    pub fn correlate(&self, f: &[f64], out: &mut [f64]) {
        let len = self.len;
        let n = self.n;
        let mut buf = vec![Complex::new(0.0, 0.0); len.pow(self.n_dim as u32)];
        if self.n_dim == 1 {
            for i in 0..n {
                buf[i] = Complex::new(f[i], 0.0);
            }
        } else {
            for i1 in 0..n {
                for i0 in 0..n {
                    buf[i0 + len * i1] = Complex::new(f[i0 + n * i1], 0.0);
                }
            }
        }
        self.transform(&mut buf, true);
        for (b, w) in buf.iter_mut().zip(&self.w_hat) {
            *b *= w;
        }
        self.transform(&mut buf, false);
        let scale = 1.0 / (len.pow(self.n_dim as u32) as f64);
        if self.n_dim == 1 {
            for i in 0..n {
                out[i] = buf[i].re * scale;
            }
        } else {
            for i1 in 0..n {
                for i0 in 0..n {
                    out[i0 + n * i1] = buf[i0 + len * i1].re * scale;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum_1d() {
        let n = 37;
        let lag: Vec<f64> = (0..2 * n - 1).map(|k| 1.0 / (1.0 + (k as f64 - (n - 1) as f64).abs())).collect();
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let c = FftConv::new(1, n, &lag);
        let mut out = vec![0.0; n];
        c.correlate(&f, &mut out);
        for i in 0..n {
            let d: f64 = (0..n).map(|j| lag[j + n - 1 - i] * f[j]).sum();
            assert!((d - out[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_sum_2d() {
        let n = 9;
        let span = 2 * n - 1;
        let lag: Vec<f64> = (0..span * span)
            .map(|k| {
                let a = (k % span) as f64 - (n - 1) as f64;
                let b = (k / span) as f64 - (n - 1) as f64;
                1.0 / (1.0 + a * a + 2.0 * b * b)
            })
            .collect();
        let f: Vec<f64> = (0..n * n).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let c = FftConv::new(2, n, &lag);
        let mut out = vec![0.0; n * n];
        c.correlate(&f, &mut out);
        for i in 0..n * n {
            let (i0, i1) = (i % n, i / n);
            let mut d = 0.0;
            for j in 0..n * n {
                let (j0, j1) = (j % n, j / n);
                let k = (j0 + n - 1 - i0) + span * (j1 + n - 1 - i1);
                d += lag[k] * f[j];
            }
            assert!((d - out[i]).abs() < 1e-10);
        }
    }
}
