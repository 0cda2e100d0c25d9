//! Kernels k(t, x, z) = K(t, x, x+z)|z|^{N+α}, their parameter sets, and the
//! derived kernels (backward, rescaled, mollified).

mod conditions;
mod derived;
pub mod library;
mod params;

pub use conditions::{check_conditions, sphere_moment, ConditionReport, SamplingPlan, Sample, Verdict};
pub use params::{default_nu, gamma_interval, zeta0, Extent, HighOrder, KernelParams, ParamsSpec};

use crate::error::{domain, Error, Result};
use crate::expr::{Env, Expr};
use crate::quad::fractional_constant;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// The normalised kernel k(t, x, z).
pub trait KernelFn: Send + Sync {
    fn k(&self, t: f64, x: &[f64], z: &[f64]) -> f64;
}

impl<F> KernelFn for F
where
    F: Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync,
{
    fn k(&self, t: f64, x: &[f64], z: &[f64]) -> f64 {
        self(t, x, z)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelFlags {
    pub translation_invariant: bool,
    pub time_independent: bool,
    pub smooth: bool,
}

#[derive(Clone)]
pub struct Kernel {
    f: Arc<dyn KernelFn>,
    pub params: KernelParams,
    pub flags: KernelFlags,
    /// Upper end of the time range the kernel is defined on.
    pub t_max: f64,
    pub name: String,
    /// Set on backward kernels so that reversing twice returns the original.
    reversed: Option<(Arc<Kernel>, f64)>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("flags", &self.flags)
            .field("t_max", &self.t_max)
            .finish()
    }
}

impl Kernel {
    pub fn new(name: impl Into<String>, f: Arc<dyn KernelFn>, params: KernelParams, flags: KernelFlags) -> Result<Self> {
        params.validate()?;
        Ok(Kernel { f, params, flags, t_max: f64::INFINITY, name: name.into(), reversed: None })
    }

    /// Wrap a closure; flags are taken as given.
    pub fn custom<F>(name: &str, params: KernelParams, flags: KernelFlags, f: F) -> Result<Self>
    where
        F: Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Kernel::new(name, Arc::new(f), params, flags)
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64], z: &[f64]) -> f64 {
        self.f.k(t, x, z)
    }

    /// K(t, x, y) = k(t, x, y − x)|y − x|^{−(N+α)}.
    pub fn big_k(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        let mut z = [0.0; 2];
        let n = x.len();
        for i in 0..n {
            z[i] = y[i] - x[i];
        }
        let r = norm(&z[..n]);
        self.eval(t, x, &z[..n]) * r.powf(-(n as f64 + self.params.alpha))
    }

    pub fn dim(&self) -> usize {
        self.params.n
    }

    /// The constant kernel c_{N,α} whose operator has symbol |ξ|^α.
    pub fn fractional_heat(params: KernelParams) -> Result<Self> {
        params.validate()?;
        let c = fractional_constant(params.n, params.alpha);
        let need = c.max(1.0 / c);
        if params.lambda < need {
            return Err(domain(
                "Lambda",
                format!("Lambda = {} is below max(c, 1/c) = {need} for c = {c}", params.lambda),
            ));
        }
        let flags = KernelFlags { translation_invariant: true, time_independent: true, smooth: true };
        Kernel::custom("fractional_heat", params, flags, move |_, _, _| c)
    }

    /// A translation-invariant, time-independent kernel from an even profile.
    pub fn translation_invariant<P>(profile: P, params: KernelParams) -> Result<Self>
    where
        P: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        params.validate()?;
        check_even(params.n, &profile)?;
        let flags = KernelFlags { translation_invariant: true, time_independent: true, smooth: false };
        Kernel::custom("translation_invariant", params, flags, move |_, _, z| profile(z))
    }

    /// Kernel from an expression over t, x, z, r. Flags are inferred from the
    /// variables the expression reads; translation-invariant expressions must
    /// be even in z.
    pub fn from_expr(expr: Expr, params: KernelParams) -> Result<Self> {
        params.validate()?;
        let flags = KernelFlags {
            translation_invariant: !expr.uses_x(),
            time_independent: !expr.uses_t(),
            smooth: false,
        };
        if flags.translation_invariant && flags.time_independent {
            let e = expr.clone();
            check_even(params.n, &move |z: &[f64]| e.eval(&Env::txz(0.0, &[0.0, 0.0], z)))?;
        }
        let name = format!("expr:{}", expr.source());
        Kernel::custom(&name, params, flags, move |t, x, z| expr.eval(&Env::txz(t, x, z)))
    }

    pub fn from_spec(spec: &KernelSpec) -> Result<Self> {
        let params = spec.params.resolve()?;
        match spec.kind {
            KernelKind::FractionalHeat => Kernel::fractional_heat(params),
            KernelKind::TranslationInvariant | KernelKind::CustomExpression => {
                let src = spec.profile.as_deref().ok_or_else(|| Error::Config {
                    path: "kernel.profile".into(),
                    msg: "this kernel type needs a profile expression".into(),
                })?;
                let e = Expr::parse(src)?;
                if spec.kind == KernelKind::TranslationInvariant {
                    if e.uses_x() || e.uses_t() {
                        return Err(Error::Config {
                            path: "kernel.profile".into(),
                            msg: "a translation_invariant profile may only read z and r".into(),
                        });
                    }
                    let k = Kernel::translation_invariant(move |z| e.eval(&Env::txz(0.0, &[0.0, 0.0], z)), params)?;
                    Ok(Kernel { name: format!("translation_invariant:{src}"), ..k })
                } else {
                    Kernel::from_expr(e, params)
                }
            }
        }
    }
}

fn check_even<P: Fn(&[f64]) -> f64>(n: usize, p: &P) -> Result<()> {
    let mut radii = Vec::new();
    for i in 0..=48 {
        radii.push(10f64.powf(-3.0 + 6.0 * i as f64 / 48.0));
    }
    let dirs: Vec<[f64; 2]> = if n == 1 {
        vec![[1.0, 0.0]]
    } else {
        (0..16).map(|j| {
            let th = std::f64::consts::PI * j as f64 / 16.0;
            [th.cos(), th.sin()]
        })
        .collect()
    };
    for &s in &radii {
        for d in &dirs {
            let z = [s * d[0], s * d[1]];
            let m = [-z[0], -z[1]];
            let a = p(&z[..n]);
            let b = p(&m[..n]);
            if !((a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))) {
                return Err(Error::NotEven { z: z[..n].to_vec(), a, b });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    FractionalHeat,
    TranslationInvariant,
    CustomExpression,
}

/// JSON kernel description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(rename = "type")]
    pub kind: KernelKind,
    pub params: ParamsSpec,
    #[serde(default)]
    pub profile: Option<String>,
}

#[inline]
pub(crate) fn norm(z: &[f64]) -> f64 {
    match z.len() {
        1 => z[0].abs(),
        2 => z[0].hypot(z[1]),
        _ => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractional_heat_is_constant() {
        let k = Kernel::fractional_heat(KernelParams::new(1, 0.5, 0.0, 6.0)).unwrap();
        let c = fractional_constant(1, 0.5);
        for (t, x, z) in [(0.0, 0.0, 1.0), (3.0, -2.0, 1e-4), (10.0, 5.0, -7.0)] {
            assert_eq!(k.eval(t, &[x], &[z]), c);
        }
        assert!(k.flags.translation_invariant && k.flags.time_independent);
    }

    #[test]
    fn fractional_heat_rejects_small_lambda() {
        let e = Kernel::fractional_heat(KernelParams::new(1, 0.5, 0.0, 1.0)).unwrap_err();
        assert!(e.to_string().contains("Lambda"));
    }

    #[test]
    fn odd_profile_rejected_with_witness() {
        let p = KernelParams::new(1, 0.5, 0.0, 20.0);
        match Kernel::translation_invariant(|z| 1.0 + 0.9 * z[0].sin(), p) {
            Err(Error::NotEven { z, a, b }) => {
                assert_eq!(z.len(), 1);
                assert!((a - b).abs() > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expr_flags_inferred() {
        let p = KernelParams::new(1, 0.5, 0.0, 2.0);
        let k = Kernel::from_expr(Expr::parse("1 + 0.4*cos(x + z/2)*cos(r)").unwrap(), p).unwrap();
        assert!(!k.flags.translation_invariant);
        assert!(k.flags.time_independent);
        let k = Kernel::from_expr(Expr::parse("1 + t/(1+t)").unwrap(), p).unwrap();
        assert!(k.flags.translation_invariant && !k.flags.time_independent);
        assert!(Kernel::from_expr(Expr::parse("1 + 0.5*sin(z)").unwrap(), p).is_err());
    }

    #[test]
    fn spec_loading() {
        let s: KernelSpec = serde_json::from_str(
            r#"{"type": "translation_invariant", "params": {"alpha": 1.5, "lambda": 2}, "profile": "1 + 0.5*cos(r)"}"#,
        )
        .unwrap();
        let k = Kernel::from_spec(&s).unwrap();
        assert!((k.eval(0.0, &[0.0], &[0.0]) - 1.5).abs() < 1e-15);
        let s: KernelSpec =
            serde_json::from_str(r#"{"type": "translation_invariant", "params": {"alpha": 1.5, "lambda": 2}}"#).unwrap();
        assert!(Kernel::from_spec(&s).is_err());
    }

    #[test]
    fn big_k_relation() {
        let k = Kernel::fractional_heat(KernelParams::new(1, 1.0, 0.0, 4.0)).unwrap();
        let v = k.big_k(0.0, &[1.0], &[3.0]);
        assert!((v - fractional_constant(1, 1.0) / 4.0).abs() < 1e-15);
    }
}
