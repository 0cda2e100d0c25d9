//! Log-log exponent fits with a bootstrap confidence half-width.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% percentile bootstrap interval of the slope.
    pub half_width: f64,
    pub points: usize,
    pub r2: f64,
}

pub const BOOTSTRAP: usize = 200;

fn least_squares(x: &[f64], y: &[f64], idx: impl Iterator<Item = usize> + Clone) -> (f64, f64, f64) {
    let n = idx.clone().count() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for i in idx.clone() {
        sx += x[i];
        sy += y[i];
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in idx {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// Slope of log y against log x. Needs at least 8 positive points spanning a
/// decade in x.
pub fn fit_exponent(x: &[f64], y: &[f64], seed: u64) -> Result<ExponentFit> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} abscissae vs {} ordinates", x.len(), y.len())));
    }
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 8 {
        return Err(Error::Range(format!("{} usable points; an exponent fit needs at least 8", pts.len())));
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let span = lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lx.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < 10f64.ln() * (1.0 - 1e-9) {
        return Err(Error::Range(format!("abscissae span a factor {:.3}; an exponent fit needs a decade", span.exp())));
    }
    let n = lx.len();
    let (slope, intercept, r2) = least_squares(&lx, &ly, 0..n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes: Vec<f64> = (0..BOOTSTRAP)
        .map(|_| {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            least_squares(&lx, &ly, idx.into_iter()).0
        })
        .collect();
    slopes.sort_by(f64::total_cmp);
    let q = |p: f64| slopes[((p * (BOOTSTRAP - 1) as f64).round() as usize).min(BOOTSTRAP - 1)];
    Ok(ExponentFit { slope, intercept, half_width: 0.5 * (q(0.975) - q(0.025)), points: n, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x: Vec<f64> = (0..20).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-1.5)).collect();
        let f = fit_exponent(&x, &y, 7).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!(f.half_width < 1e-10);
    }

    #[test]
    fn too_short_range_is_rejected() {
        let x: Vec<f64> = (1..=10).map(|i| 1.0 + i as f64 * 0.1).collect();
        assert!(fit_exponent(&x, &x, 1).is_err());
    }
}
