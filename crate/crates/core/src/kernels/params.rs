use crate::error::{domain, Result};
use crate::quad::ball_volume;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A radius that may be infinite. Serialised as a number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extent {
    Finite(f64),
    Unbounded,
}

impl Extent {
    pub fn value(self) -> f64 {
        match self {
            Extent::Finite(v) => v,
            Extent::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extent::Finite(_))
    }

    /// `s <= self`, with the unbounded marker above every radius.
    pub fn covers(self, s: f64) -> bool {
        match self {
            Extent::Finite(v) => s <= v,
            Extent::Unbounded => true,
        }
    }

    pub fn scale(self, f: f64) -> Extent {
        match self {
            Extent::Finite(v) => Extent::Finite(v * f),
            Extent::Unbounded => Extent::Unbounded,
        }
    }

    pub fn from_f64(v: f64) -> Extent {
        if v.is_infinite() {
            Extent::Unbounded
        } else {
            Extent::Finite(v)
        }
    }
}

impl Serialize for Extent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extent::Finite(v) => s.serialize_f64(*v),
            Extent::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Extent::Finite(v)),
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "unbounded") => Ok(Extent::Unbounded),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighOrder {
    pub nu: f64,
    pub s0: Extent,
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelParams {
    pub n: usize,
    pub alpha: f64,
    pub zeta: Extent,
    pub omega: f64,
    pub lambda: f64,
    pub high_order: Option<HighOrder>,
    pub gamma: f64,
}

/// Default ν: a quarter of the way into (α−1, min{1, min{N,α}−ω}).
pub fn default_nu(n: usize, alpha: f64, omega: f64) -> f64 {
    let lo = alpha - 1.0;
    let hi = 1f64.min((n as f64).min(alpha) - omega);
    lo + 0.25 * (hi - lo)
}

/// Open interval of admissible γ.
pub fn gamma_interval(n: usize, alpha: f64, omega: f64, nu: Option<f64>) -> (f64, f64) {
    if alpha < 1.0 {
        (0.0, alpha - omega)
    } else {
        let nu = nu.unwrap_or_else(|| default_nu(n, alpha, omega));
        ((alpha - n as f64).max(0.0), alpha - omega - nu)
    }
}

impl KernelParams {
    /// Parameters with ζ = ∞, and for α ≥ 1 the default ν with s₀ = ∞, τ = 0.
    /// γ is the midpoint of its admissible interval.
    pub fn new(n: usize, alpha: f64, omega: f64, lambda: f64) -> Self {
        let high_order = if alpha >= 1.0 {
            Some(HighOrder { nu: default_nu(n, alpha, omega), s0: Extent::Unbounded, tau: 0.0 })
        } else {
            None
        };
        let mut p = KernelParams { n, alpha, zeta: Extent::Unbounded, omega, lambda, high_order, gamma: 0.0 };
        p.gamma = p.gamma_midpoint();
        p
    }

    pub fn with_zeta(mut self, zeta: f64) -> Self {
        self.zeta = Extent::from_f64(zeta);
        self
    }

    pub fn with_high_order(mut self, nu: f64, s0: f64, tau: f64) -> Self {
        self.high_order = Some(HighOrder { nu, s0: Extent::from_f64(s0), tau });
        self.gamma = self.gamma_midpoint();
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        if let Some(h) = self.high_order.as_mut() {
            h.tau = tau;
        }
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn nu(&self) -> Option<f64> {
        self.high_order.map(|h| h.nu)
    }

    pub fn gamma_interval(&self) -> (f64, f64) {
        gamma_interval(self.n, self.alpha, self.omega, self.nu())
    }

    pub fn gamma_midpoint(&self) -> f64 {
        let (a, b) = self.gamma_interval();
        0.5 * (a + b)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.n == 1 || p.n == 2) {
            return Err(domain("N", format!("N = {} but only N in {{1, 2}} is supported", p.n)));
        }
        if !(p.alpha > 0.0 && p.alpha < 2.0) {
            return Err(domain("alpha", format!("alpha = {} must lie in (0, 2)", p.alpha)));
        }
        if !(p.omega >= 0.0 && p.omega < p.alpha) {
            return Err(domain("omega", format!("omega = {} must lie in [0, alpha) = [0, {})", p.omega, p.alpha)));
        }
        if !(p.lambda >= 1.0) {
            return Err(domain("Lambda", format!("Lambda = {} must be >= 1", p.lambda)));
        }
        if let Extent::Finite(z) = p.zeta {
            if !(z > 0.0) {
                return Err(domain("zeta", format!("zeta = {z} must be > 0")));
            }
        }
        match (p.alpha >= 1.0, p.high_order) {
            (true, None) => {
                return Err(domain("high_order", format!("alpha = {} >= 1 requires (nu, s0, tau)", p.alpha)));
            }
            (false, Some(_)) => {
                return Err(domain("high_order", format!("alpha = {} < 1 takes no (nu, s0, tau)", p.alpha)));
            }
            (true, Some(h)) => {
                if !(h.nu > p.alpha - 1.0 && h.nu < 1.0) {
                    return Err(domain("nu", format!("nu = {} must lie in (alpha - 1, 1) = ({}, 1)", h.nu, p.alpha - 1.0)));
                }
                let cap = (p.n as f64).min(p.alpha);
                if !(h.nu + p.omega < cap) {
                    return Err(domain("nu", format!("nu + omega = {} must be < min(N, alpha) = {cap}", h.nu + p.omega)));
                }
                if !(h.tau >= 0.0 && h.tau.is_finite()) {
                    return Err(domain("tau", format!("tau = {} must be finite and >= 0", h.tau)));
                }
                if let Extent::Finite(s) = h.s0 {
                    if !(s > 0.0) {
                        return Err(domain("s0", format!("s0 = {s} must be > 0")));
                    }
                }
            }
            (false, None) => {}
        }
        let (lo, hi) = p.gamma_interval();
        if !(p.gamma > lo && p.gamma < hi) {
            return Err(domain("gamma", format!("gamma = {} must lie in ({lo}, {hi})", p.gamma)));
        }
        Ok(())
    }
}

/// JSON form of [`KernelParams`]; omitted fields take the documented defaults.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default = "one")]
    pub n: usize,
    pub alpha: f64,
    #[serde(default)]
    pub zeta: Option<Extent>,
    #[serde(default)]
    pub omega: f64,
    #[serde(rename = "lambda", alias = "Lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub s0: Option<Extent>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

fn one() -> usize {
    1
}

impl ParamsSpec {
    pub fn resolve(&self) -> Result<KernelParams> {
        let mut p = KernelParams::new(self.n, self.alpha, self.omega, self.lambda);
        if let Some(z) = self.zeta {
            p.zeta = z;
        }
        if self.alpha >= 1.0 {
            let nu = self.nu.unwrap_or_else(|| default_nu(self.n, self.alpha, self.omega));
            p.high_order = Some(HighOrder {
                nu,
                s0: self.s0.unwrap_or(Extent::Unbounded),
                tau: self.tau.unwrap_or(0.0),
            });
        } else if self.nu.is_some() || self.s0.is_some() || self.tau.is_some() {
            return Err(domain("high_order", format!("alpha = {} < 1 takes no (nu, s0, tau)", self.alpha)));
        }
        p.gamma = self.gamma.unwrap_or_else(|| p.gamma_midpoint());
        p.validate()?;
        Ok(p)
    }
}

/// ζ₀ = max{(8/V_N)^{1/N}, 2·11^{1/γ}}.
pub fn zeta0(n: usize, gamma: f64) -> f64 {
    let a = (8.0 / ball_volume(n)).powf(1.0 / n as f64);
    let b = 2.0 * 11f64.powf(1.0 / gamma);
    a.max(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_midpoint() {
        let p = KernelParams::new(1, 0.5, 0.0, 5.0);
        assert_eq!(p.gamma, 0.25);
        assert!(p.validate().is_ok());
        let q = KernelParams::new(1, 1.5, 0.0, 2.0);
        let nu = q.nu().unwrap();
        assert!((nu - 0.625).abs() < 1e-15);
        assert!((q.gamma - 0.5 * (0.5 + 1.5 - 0.625)).abs() < 1e-15);
        assert!(q.validate().is_ok());
    }

    #[test]
    fn violations_are_named() {
        let e = KernelParams::new(1, 2.5, 0.0, 2.0).validate().unwrap_err().to_string();
        assert!(e.contains("alpha"), "{e}");
        let e = KernelParams::new(1, 0.5, 0.0, 0.5).validate().unwrap_err().to_string();
        assert!(e.contains("Lambda"), "{e}");
        let e = KernelParams::new(1, 0.5, 0.6, 2.0).validate().unwrap_err().to_string();
        assert!(e.contains("omega"), "{e}");
        let mut p = KernelParams::new(1, 1.5, 0.0, 2.0);
        p.high_order = None;
        assert!(p.validate().unwrap_err().to_string().contains("high_order"));
        let p = KernelParams::new(1, 0.5, 0.0, 2.0).with_gamma(0.5);
        assert!(p.validate().unwrap_err().to_string().contains("gamma"));
    }

    #[test]
    fn spec_roundtrip() {
        let s: ParamsSpec = serde_json::from_str(r#"{"alpha": 1.5, "lambda": 4, "s0": "inf", "zeta": 10}"#).unwrap();
        let p = s.resolve().unwrap();
        assert_eq!(p.zeta, Extent::Finite(10.0));
        assert_eq!(p.high_order.unwrap().s0, Extent::Unbounded);
        let bad: ParamsSpec = serde_json::from_str(r#"{"alpha": 2.5, "lambda": 4}"#).unwrap();
        assert!(bad.resolve().unwrap_err().to_string().contains("alpha"));
    }

    #[test]
    fn extent_ordering() {
        assert!(Extent::Unbounded.covers(1e300));
        assert!(!Extent::Finite(1.0).covers(2.0));
        assert_eq!(Extent::Finite(2.0).scale(0.5), Extent::Finite(1.0));
    }
}
