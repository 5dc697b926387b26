//! Free transition density of Z^a = B + aY, where B is Brownian motion with
//! E[(B_t - B_0)²] = 2t per axis and Y is the isotropic α-stable process.
//! The generator is Δ + a^α Δ^{α/2}; the characteristic exponent is
//! |ξ|² + a^α|ξ|^α.

mod fourier;
mod resolvent;
mod slice;
pub mod subordination;

use std::f64::consts::PI;

use serde::Serialize;

use crate::special::gamma;
use crate::{Error, Result};

pub use fourier::rho_max;
pub use resolvent::{
    contraction_threshold, gradient_resolvent_apply, resolvent_apply, resolvent_density, resolvent_gradient, ContractionReport,
    GridField, ResolventOutput, ResolventProfile, UniformGrid,
};
pub use slice::{slice, RadialSlice, SLICE_NODES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StableParams {
    pub d: usize,
    pub alpha: f64,
    pub a: f64,
    /// upper bound M on the scale a
    pub cap: f64,
}

impl StableParams {
    pub fn new(d: usize, alpha: f64, a: f64, cap: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Domain("alpha must lie in (0,2)".into()));
        }
        if !(cap > 0.0) {
            return Err(Error::Domain("cap M must be positive".into()));
        }
        if !(a > 0.0 && a <= cap) {
            return Err(Error::Domain("a must lie in (0, M]".into()));
        }
        Ok(Self { d, alpha, a, cap })
    }

    /// Same scale, different dimension; used for the (d+2) gradient lift.
    pub fn with_dim(&self, d: usize) -> Self {
        Self { d, ..*self }
    }

    pub fn with_a(&self, a: f64) -> Result<Self> {
        Self::new(self.d, self.alpha, a, self.cap)
    }

    /// a^α
    pub fn jump_weight(&self) -> f64 {
        self.a.powf(self.alpha)
    }

    /// Length scale of the stable part at time t.
    pub fn stable_scale(&self, t: f64) -> f64 {
        self.a * t.powf(1.0 / self.alpha)
    }

    /// Radius separating the oscillatory-inversion region from the far field.
    pub fn core_radius(&self, t: f64) -> f64 {
        12.0 * (t.sqrt() + self.stable_scale(t))
    }

    /// Tail law a^α 𝒜 t r^{-(d+α)}.
    pub fn tail_law(&self, t: f64, r: f64) -> f64 {
        self.jump_weight() * levy_constant_unchecked(self.d, self.alpha) * t * r.powf(-(self.d as f64 + self.alpha))
    }
}

/// 𝒜(d, -α) = α 2^{α-1} π^{-d/2} Γ((d+α)/2) / Γ(1-α/2).
pub fn levy_constant(d: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Domain("alpha must lie in (0,2)".into()));
    }
    if d < 1 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    Ok(levy_constant_unchecked(d, alpha))
}

fn levy_constant_unchecked(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    alpha * 2f64.powf(alpha - 1.0) * PI.powf(-df / 2.0) * gamma((df + alpha) / 2.0) / gamma(1.0 - alpha / 2.0)
}

/// |ξ|² + a^α |ξ|^α.
pub fn char_exponent(params: &StableParams, xi: &[f64]) -> f64 {
    let r = norm(xi);
    if r == 0.0 {
        return 0.0;
    }
    r * r + params.jump_weight() * r.powf(params.alpha)
}

/// J^a(x, y) = a^α 𝒜 |x - y|^{-(d+α)}.
pub fn levy_density(params: &StableParams, x: &[f64], y: &[f64]) -> Result<f64> {
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::Singular("Lévy intensity is infinite on the diagonal".into()));
    }
    Ok(params.jump_weight() * levy_constant_unchecked(params.d, params.alpha) * r.powf(-(params.d as f64 + params.alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// p_{d+2}(t, r), which gives the radial derivative -2πr p_{d+2}
    pub lifted: f64,
    pub error: f64,
}

/// Radial profile pair at radius r, uncached. Oscillatory inversion inside
/// the core radius, subordination outside.
pub fn radial_evaluation(params: &StableParams, t: f64, r: f64) -> Result<Evaluation> {
    if !(t > 0.0) {
        return Err(Error::Domain("time must be positive".into()));
    }
    let aa = params.jump_weight();
    if r <= params.core_radius(t) {
        let p = fourier::radial_pair(params.d, params.alpha, aa, t, r);
        Ok(Evaluation {
            value: p.value,
            lifted: p.lifted,
            error: p.error,
        })
    } else {
        let (v, l) = subordination::radial_pair(params.d, params.alpha, params.a, t, r);
        Ok(Evaluation {
            value: v,
            lifted: l,
            error: 0.0,
        })
    }
}

/// Relative error budget above which a point evaluation is reported as
/// inaccurate.
pub const ACCURACY_BUDGET: f64 = 1e-7;

/// p^a(t, x).
pub fn eval_density(params: &StableParams, t: f64, x: &[f64]) -> Result<f64> {
    let e = radial_evaluation(params, t, norm(x))?;
    check_accuracy(&e, t)?;
    Ok(e.value)
}

fn check_accuracy(e: &Evaluation, t: f64) -> Result<()> {
    let floor = 1e-13 * t.powf(-0.5);
    if e.error > ACCURACY_BUDGET * e.value.abs() + floor {
        return Err(Error::Accuracy {
            estimate: e.error,
            tolerance: ACCURACY_BUDGET * e.value.abs() + floor,
            context: "oscillatory inversion".into(),
        });
    }
    Ok(())
}

/// ∇_x p^a(t, x) = -2π x p^a_{d+2}(t, |x|).
pub fn grad_density(params: &StableParams, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let e = radial_evaluation(params, t, norm(x))?;
    Ok(x.iter().map(|&xi| -2.0 * PI * xi * e.lifted).collect())
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Gaussian heat kernel of Δ, (4πt)^{-d/2} e^{-|x|²/4t}.
pub fn gaussian_kernel(d: usize, t: f64, r: f64) -> f64 {
    (4.0 * PI * t).powf(-(d as f64) / 2.0) * (-r * r / (4.0 * t)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(d: usize, alpha: f64, a: f64) -> StableParams {
        StableParams::new(d, alpha, a, 2.0).unwrap()
    }

    #[test]
    fn levy_constant_cauchy() {
        let v = levy_constant(1, 1.0).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn levy_constant_rejects_bad_alpha() {
        assert!(levy_constant(1, 2.0).is_err());
        assert!(levy_constant(1, 0.0).is_err());
    }

    #[test]
    fn levy_constant_small_alpha_vanishes() {
        assert!(levy_constant(2, 1e-9).unwrap() < 1e-9);
    }

    #[test]
    fn params_reject_alpha_out_of_range() {
        let e = StableParams::new(1, 2.5, 1.0, 2.0).unwrap_err();
        assert!(e.to_string().contains("alpha must lie in (0,2)"));
    }

    #[test]
    fn char_exponent_examples() {
        assert_eq!(char_exponent(&p(1, 1.0, 1.0), &[0.0]), 0.0);
        assert!((char_exponent(&p(1, 1.0, 1.0), &[1.0]) - 2.0).abs() < 1e-15);
        assert!((char_exponent(&p(1, 1.0, 2.0), &[3.0]) - 15.0).abs() < 1e-13);
    }

    #[test]
    fn levy_density_examples() {
        let q = p(1, 1.0, 1.0);
        assert!((levy_density(&q, &[0.0], &[1.0]).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!(levy_density(&q, &[0.3], &[0.3]).is_err());
        let q2 = p(2, 1.3, 1.7);
        let q1 = p(2, 1.3, 1.0);
        let x = [0.1, 0.4];
        let y = [-1.0, 2.0];
        let ratio = levy_density(&q2, &x, &y).unwrap() / levy_density(&q1, &x, &y).unwrap();
        assert!((ratio - 1.7f64.powf(1.3)).abs() < 1e-12);
    }

    #[test]
    fn cauchy_plus_gaussian_on_diagonal() {
        // (1/π)∫_0^∞ e^{-ξ²-ξ} dξ = e^{1/4} √π erfc(1/2) / (2π)
        let v = eval_density(&p(1, 1.0, 1.0), 1.0, &[0.0]).unwrap();
        let e = 0.25f64.exp() * PI.sqrt() * crate::special::erfc(0.5) / (2.0 * PI);
        assert!((v - e).abs() < 1e-12, "{v} vs {e}");
        assert!((v - 0.17367).abs() < 5e-5);
    }

    #[test]
    fn gaussian_limit_on_diagonal() {
        let v = eval_density(&p(1, 1.0, 1e-12), 1.0, &[0.0]).unwrap();
        assert!((v - 0.282_094_791_773_878_1).abs() < 1e-9);
    }

    #[test]
    fn gaussian_limit_gradient() {
        let g = grad_density(&p(1, 1.0, 1e-12), 1.0, &[1.0]).unwrap();
        let e = -0.5 * (4.0 * PI).powf(-0.5) * (-0.25f64).exp();
        assert!((g[0] - e).abs() < 1e-9, "{} vs {e}", g[0]);
        assert!((g[0] + 0.10984).abs() < 1e-5);
    }

    #[test]
    fn gradient_zero_at_origin() {
        let g = grad_density(&p(2, 1.2, 0.8), 0.4, &[0.0, 0.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn routes_agree_at_the_core_radius() {
        for &(d, alpha, a, t) in &[(1, 0.5, 1.0, 1.0), (1, 1.5, 0.5, 0.1), (2, 1.0, 1.0, 0.3), (3, 1.2, 2.0, 0.05)] {
            let q = p(d, alpha, a);
            for frac in [0.05, 0.3, 1.0] {
                let r = frac * q.core_radius(t);
                let f = fourier::radial_pair(d, alpha, q.jump_weight(), t, r);
                let (s, sl) = subordination::radial_pair(d, alpha, a, t, r);
                assert!((f.value / s - 1.0).abs() < 1e-9, "d={d} α={alpha} r={r}: {} vs {s}", f.value);
                assert!((f.lifted / sl - 1.0).abs() < 1e-8, "lifted d={d} α={alpha} r={r}: {} vs {sl}", f.lifted);
            }
        }
    }

    #[test]
    fn far_field_approaches_tail_law() {
        let q = p(1, 1.0, 1.0);
        let r = 1e4;
        let v = eval_density(&q, 1.0, &[r]).unwrap();
        assert!((v / q.tail_law(1.0, r) - 1.0).abs() < 1e-3);
    }
}
