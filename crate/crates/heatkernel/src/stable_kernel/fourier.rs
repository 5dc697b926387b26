//! Radial Fourier inversion of exp(-t(|ξ|² + A|ξ|^α)).
//!
//! In dimension d the radial profile is
//! p_d(r) = (2π)^{-d/2} ∫_0^∞ ρ^{d-1} Λ_{(d-2)/2}(rρ) e^{-tψ(ρ)} dρ
//! with Λ_ν(z) = z^{-ν}J_ν(z). The (d+2)-dimensional profile is computed in
//! the same pass since it gives the radial derivative.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::quad::GaussLegendre;
use crate::special::bessel_lambda;

fn gl8() -> &'static GaussLegendre {
    static GL: OnceLock<GaussLegendre> = OnceLock::new();
    GL.get_or_init(|| GaussLegendre::new(8))
}

#[derive(Debug, Clone, Copy)]
pub struct RadialPair {
    /// p_d(t, r)
    pub value: f64,
    /// p_{d+2}(t, r)
    pub lifted: f64,
    /// panel-refinement error estimate for `value`
    pub error: f64,
}

/// Truncation point of the frequency integral; beyond it e^{-tψ} < e^{-50}.
pub fn rho_max(t: f64, aa: f64, alpha: f64) -> f64 {
    let gauss = (50.0 / t).sqrt();
    if aa > 0.0 {
        gauss.min((50.0 / (aa * t)).powf(1.0 / alpha))
    } else {
        gauss
    }
}

pub fn radial_pair(d: usize, alpha: f64, aa: f64, t: f64, r: f64) -> RadialPair {
    let rmax = rho_max(t, aa, alpha);
    let panel = if r > 0.0 {
        (PI / r).min(rmax / 8.0)
    } else {
        rmax / 8.0
    };
    let (c0, _) = panels(d, alpha, aa, t, r, rmax, panel);
    let (f0, f1) = panels(d, alpha, aa, t, r, rmax, 0.5 * panel);
    let n0 = (2.0 * PI).powf(-(d as f64) / 2.0);
    let n1 = n0 / (2.0 * PI);
    RadialPair {
        value: n0 * f0,
        lifted: n1 * f1,
        error: n0 * (f0 - c0).abs(),
    }
}

fn panels(d: usize, alpha: f64, aa: f64, t: f64, r: f64, rmax: f64, len: f64) -> (f64, f64) {
    let gl = gl8();
    let nu0 = d as i32 - 2;
    let nu1 = d as i32;
    let dm1 = d as i32 - 1;
    let integrand = |rho: f64| -> (f64, f64) {
        let e = (-t * (rho * rho + aa * rho.powf(alpha))).exp();
        let z = r * rho;
        let base = rho.powi(dm1) * e;
        (base * bessel_lambda(nu0, z), base * rho * rho * bessel_lambda(nu1, z))
    };
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let panel = |a: f64, b: f64, s0: &mut f64, s1: &mut f64| {
        for (x, w) in gl.mapped(a, b) {
            let (v0, v1) = integrand(x);
            *s0 += w * v0;
            *s1 += w * v1;
        }
    };
    // geometric grading of the first panel resolves the |ρ|^α cusp at 0
    let grading = if aa > 0.0 { 14 } else { 0 };
    let mut hi = len.min(rmax);
    for _ in 0..grading {
        panel(0.5 * hi, hi, &mut s0, &mut s1);
        hi *= 0.5;
    }
    panel(0.0, hi, &mut s0, &mut s1);
    let n = (rmax / len).ceil() as usize;
    for k in 1..n {
        let a = k as f64 * len;
        let b = ((k + 1) as f64 * len).min(rmax);
        if b > a {
            panel(a, b, &mut s0, &mut s1);
        }
    }
    (s0, s1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_limit_matches_closed_form() {
        for d in 1..=5usize {
            for &r in &[0.0, 0.3, 1.0, 2.5] {
                let t = 0.7;
                let p = radial_pair(d, 1.0, 0.0, t, r);
                let g = (4.0 * PI * t).powf(-(d as f64) / 2.0) * (-r * r / (4.0 * t)).exp();
                assert!((p.value / g - 1.0).abs() < 1e-11, "d={d} r={r}: {} vs {g}", p.value);
                let g2 = g / (4.0 * PI * t);
                assert!((p.lifted / g2 - 1.0).abs() < 1e-11);
            }
        }
    }
}
