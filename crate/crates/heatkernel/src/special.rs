//! Special functions used by the kernels: Gamma, the upper incomplete Gamma
//! function, and the normalized Bessel kernel `z^{-ν} J_ν(z)`.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Surface area of the unit sphere in R^d.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Upper incomplete Gamma function Γ(s, z) = ∫_z^∞ u^{s-1} e^{-u} du, not regularized.
///
/// Valid for s ≥ 0 and z > 0 (z = 0 is allowed when s > 0).
pub fn upper_incomplete_gamma(s: f64, z: f64) -> f64 {
    assert!(s >= 0.0 && z >= 0.0, "upper_incomplete_gamma needs s >= 0, z >= 0");
    if z == 0.0 {
        return if s > 0.0 { gamma(s) } else { f64::INFINITY };
    }
    if z > s + 1.0 || (s == 0.0 && z > 1.0) {
        return continued_fraction(s, z);
    }
    if s == 0.0 {
        return exp_integral_e1_series(z);
    }
    gamma(s) - lower_series(s, z)
}

/// γ(s, z) by its power series; converges quickly for z < s + 1.
fn lower_series(s: f64, z: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut n = 1.0;
    while n < 1000.0 {
        term *= z / (s + n);
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
        n += 1.0;
    }
    sum * (s * z.ln() - z).exp()
}

fn exp_integral_e1_series(z: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -z / kf;
        let add = term / kf;
        sum += add;
        if add.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - z.ln() - sum
}

/// Modified Lentz evaluation of the continued fraction for Γ(s, z).
fn continued_fraction(s: f64, z: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = z + 1.0 - s;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (s * z.ln() - z).exp() * h
}

/// Normalized Bessel kernel Λ_ν(z) = z^{-ν} J_ν(z) for ν = two_nu / 2.
///
/// Finite at z = 0 with value 1 / (2^ν Γ(ν+1)). Supported orders:
/// ν ∈ {-1/2, 0, 1/2, 1, 3/2, 2, 5/2}, which covers radial inversion up to
/// seven dimensions.
pub fn bessel_lambda(two_nu: i32, z: f64) -> f64 {
    let z = z.abs();
    if two_nu == -1 {
        return (2.0 / PI).sqrt() * z.cos();
    }
    if z < 2.0 {
        return bessel_lambda_series(two_nu, z);
    }
    let s2pi = (2.0 / PI).sqrt();
    match two_nu {
        0 => libm::j0(z),
        1 => s2pi * z.sin() / z,
        2 => libm::j1(z) / z,
        3 => s2pi * (z.sin() - z * z.cos()) / (z * z * z),
        4 => libm::jn(2, z) / (z * z),
        5 => {
            let z2 = z * z;
            s2pi * ((3.0 - z2) * z.sin() - 3.0 * z * z.cos()) / (z2 * z2 * z)
        }
        _ => panic!("bessel_lambda: unsupported order 2ν = {two_nu}"),
    }
}

fn bessel_lambda_series(two_nu: i32, z: f64) -> f64 {
    let nu = two_nu as f64 / 2.0;
    let q = 0.25 * z * z;
    let mut term = 1.0 / (2f64.powf(nu) * gamma(nu + 1.0));
    let mut sum = term;
    for k in 1..60 {
        let kf = k as f64;
        term *= -q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_half_integer() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma(1.5) - 0.5 * PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn incomplete_gamma_special_cases() {
        // Γ(1, z) = e^{-z}
        for &z in &[0.1, 0.9, 1.5, 7.0, 30.0] {
            let v = upper_incomplete_gamma(1.0, z);
            assert!((v / (-z as f64).exp() - 1.0).abs() < 1e-13, "z={z} v={v}");
        }
        // Γ(1/2, z) = √π erfc(√z)
        for &z in &[0.01, 0.3, 1.0, 2.5, 20.0] {
            let v = upper_incomplete_gamma(0.5, z);
            let e = PI.sqrt() * erfc(z.sqrt());
            assert!((v / e - 1.0).abs() < 1e-12, "z={z} v={v} e={e}");
        }
    }

    #[test]
    fn exponential_integral_values() {
        // E1(1) and E1(0.1) from Abramowitz & Stegun table 5.1
        assert!((upper_incomplete_gamma(0.0, 1.0) - 0.219_383_934_395_520_3).abs() < 1e-14);
        assert!((upper_incomplete_gamma(0.0, 0.1) - 1.822_923_958_419_390_7).abs() < 1e-13);
        assert!((upper_incomplete_gamma(0.0, 5.0) - 1.148_295_591_275_325_8e-3).abs() < 1e-16);
    }

    #[test]
    fn bessel_lambda_is_continuous_across_branches() {
        for two_nu in [0, 1, 2, 3, 4, 5] {
            let lo = bessel_lambda(two_nu, 2.0 - 1e-12);
            let hi = bessel_lambda(two_nu, 2.0 + 1e-12);
            assert!((lo - hi).abs() < 1e-11, "2ν={two_nu}: {lo} vs {hi}");
        }
    }

    #[test]
    fn bessel_lambda_at_origin() {
        assert!((bessel_lambda(0, 0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_lambda(2, 0.0) - 0.5).abs() < 1e-15);
        let v = bessel_lambda(1, 0.0);
        assert!((v - (2.0 / PI).sqrt()).abs() < 1e-15);
    }
}
