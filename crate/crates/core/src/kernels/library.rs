//! Built-in kernels used by the experiments and the acceptance suite.

use super::{default_nu, Kernel, KernelFlags, KernelParams};
use crate::error::Result;
use crate::quad::fractional_constant;

fn with_holder(mut p: KernelParams, s0: f64, tau: f64) -> KernelParams {
    if p.alpha >= 1.0 {
        p = p.with_high_order(default_nu(p.n, p.alpha, p.omega), s0, tau);
    }
    p
}

/// Fractional heat kernel with the smallest admissible Λ.
pub fn heat(n: usize, alpha: f64) -> Result<Kernel> {
    let c = fractional_constant(n, alpha);
    Kernel::fractional_heat(KernelParams::new(n, alpha, 0.0, c.max(1.0 / c).max(1.0)))
}

/// k(z) = 1 + ½cos|z|; Λ = 2, and for α ≥ 1 s₀ = 1, τ = 1.
pub fn cosine_profile(n: usize, alpha: f64) -> Result<Kernel> {
    let p = with_holder(KernelParams::new(n, alpha, 0.0, 2.0), 1.0, 1.0);
    let k = Kernel::translation_invariant(|z| 1.0 + 0.5 * super::norm(z).cos(), p)?;
    Ok(Kernel { name: "cosine_profile".into(), ..k })
}

/// k(x, z) = 1 + 0.4 cos(x₁ + z₁/2) cos|z|, symmetric because x₁ + z₁/2 is
/// the first coordinate of the midpoint of x and y.
pub fn x_dependent(n: usize, alpha: f64) -> Result<Kernel> {
    let p = with_holder(KernelParams::new(n, alpha, 0.0, 2.0), 1.0, 1.0);
    let flags = KernelFlags { translation_invariant: false, time_independent: true, smooth: true };
    Kernel::custom("x_dependent", p, flags, |_, x, z| 1.0 + 0.4 * (x[0] + 0.5 * z[0]).cos() * super::norm(z).cos())
}

/// k(t) = c(1 + t/(1+t)) with c the fractional-heat constant.
pub fn time_dependent(n: usize, alpha: f64) -> Result<Kernel> {
    let c = fractional_constant(n, alpha);
    let p = with_holder(KernelParams::new(n, alpha, 0.0, (2.0 * c).max(1.0 / c).max(1.0)), f64::INFINITY, 0.0);
    let flags = KernelFlags { translation_invariant: true, time_independent: false, smooth: true };
    Kernel::custom("time_dependent", p, flags, move |t, _, _| c * (1.0 + t / (1.0 + t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{check_conditions, SamplingPlan};

    #[test]
    fn library_kernels_pass_their_conditions() {
        for alpha in [0.5, 1.5] {
            for k in [heat(1, alpha), cosine_profile(1, alpha), x_dependent(1, alpha), time_dependent(1, alpha)] {
                let k = k.unwrap();
                let plan = SamplingPlan::default_for(1, 8.0, 0.05, 2.0);
                let r = check_conditions(&k, &plan).unwrap();
                assert!(r.pass(), "{} alpha {alpha}: {r:?}", k.name);
            }
        }
    }

    #[test]
    fn library_kernels_2d() {
        for k in [heat(2, 0.7), cosine_profile(2, 1.2), x_dependent(2, 0.7)] {
            let k = k.unwrap();
            let plan = SamplingPlan::default_for(2, 4.0, 0.1, 1.0);
            assert!(check_conditions(&k, &plan).unwrap().pass(), "{}", k.name);
        }
    }
}
