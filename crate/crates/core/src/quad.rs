//! Gauss-Legendre rules and a few geometric constants.

use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use std::sync::OnceLock;

#[derive(Clone, Debug)]
pub struct Gauss {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Gauss {
    /// n-point rule on [-1, 1] (Newton iteration on the Legendre recurrence).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Gauss { nodes, weights }
    }

    /// Nodes and weights mapped to [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let s = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + s * x, s * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

macro_rules! cached_rule {
    ($name:ident, $n:expr) => {
        pub fn $name() -> &'static Gauss {
            static R: OnceLock<Gauss> = OnceLock::new();
            R.get_or_init(|| Gauss::new($n))
        }
    };
}
cached_rule!(g4, 4);
cached_rule!(g6, 6);
cached_rule!(g8, 8);
cached_rule!(g16, 16);
cached_rule!(g24, 24);

/// Volume of the unit ball in R^n.
pub fn ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0)
}

/// Surface measure of S^{n-1} (2 for n = 1: the counting measure on {-1, 1}).
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Constant c with (c PV ∫ (f(x)-f(y)) |x-y|^{-n-α} dy)^ = |ξ|^α f^.
pub fn fractional_constant(n: usize, alpha: f64) -> f64 {
    let nf = n as f64;
    alpha * 2f64.powf(alpha - 1.0) * gamma((nf + alpha) / 2.0)
        / (PI.powf(nf / 2.0) * gamma(1.0 - alpha / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        let g = Gauss::new(8);
        for p in 0..16 {
            let exact = (2f64.powi(p + 1) - (-1f64).powi(p + 1) * 0.0 - 0.0) / (p + 1) as f64;
            let num = g.integrate(0.0, 2.0, |x| x.powi(p));
            assert!((num - exact).abs() < 1e-12 * exact.max(1.0), "p={p}");
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 24] {
            let g = Gauss::new(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn geometric_constants() {
        assert!((ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((ball_volume(2) - PI).abs() < 1e-14);
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn fractional_constant_known_values() {
        // alpha = 1, N = 1: Cauchy kernel 1/pi.
        assert!((fractional_constant(1, 1.0) - 1.0 / PI).abs() < 1e-14);
        // alpha = 1, N = 2: Gamma(3/2) / (pi Gamma(1/2)) = 1/(2 pi).
        assert!((fractional_constant(2, 1.0) - 0.5 / PI).abs() < 1e-14);
    }
}
