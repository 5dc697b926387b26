//! Kato-class diagnostics: the modulus M_f, the kernels H^β and N^β with
//! their functionals, and mollification b_n = φ_n * b.
//!
//! Every integral is taken in polar coordinates about the evaluation point,
//! where |x - y|^{-(d-1)} cancels the Jacobian. For radial presets the
//! angular integral reduces to a one-dimensional integral in the angle to
//! the focus.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::drift::{DriftKind, DriftSpec, RadialProfile};
use crate::quad::{adaptive, tanh_sinh, tanh_sinh_floor};
use crate::special::{gamma, sphere_area, upper_incomplete_gamma};
use crate::{Error, Result};

const TOL: f64 = 1e-11;
/// absolute floor relative to the field's sup, for integrals over regions
/// where the field is negligible
const FLOOR: f64 = 1e-13;

/// γ = (1 + α∧1)/2.
pub fn gamma_exponent(alpha: f64) -> f64 {
    (1.0 + alpha.min(1.0)) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KatoTag {
    /// supremum over the finite candidate-center set
    CandidateSup,
    /// d = 1: Kato class is boundedness; the value is sup |f|
    SupNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KatoValue {
    pub value: f64,
    pub tag: KatoTag,
}

#[derive(Debug, Clone, Serialize)]
pub struct KatoReport {
    pub radii: Vec<f64>,
    pub moduli: Vec<f64>,
    pub tag: KatoTag,
    /// moduli shrink along the decreasing radii and the last is below a
    /// tenth of the first
    pub verdict: bool,
    pub gamma: f64,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Distance from x to the focus of a radial field.
fn focus_distance(f: &DriftSpec, x: &[f64]) -> f64 {
    let fc = f.focus();
    x.iter()
        .enumerate()
        .map(|(k, &v)| if k == 0 { (v - fc) * (v - fc) } else { v * v })
        .sum::<f64>()
        .sqrt()
}

/// ∫_{S^{d-1}} F(|D e - ρθ|) dθ.
fn shell(profile: &dyn RadialProfile, d: usize, dist: f64, rho: f64) -> f64 {
    if dist == 0.0 || rho == 0.0 {
        return sphere_area(d) * profile.eval(dist.max(rho));
    }
    match d {
        1 => profile.eval((dist - rho).abs()) + profile.eval(dist + rho),
        2 => {
            let lo2 = (rho - dist) * (rho - dist);
            let prod = 4.0 * rho * dist;
            let mut cuts = vec![0.0];
            for sb in profile.breaks() {
                let c = (sb * sb - lo2) / prod;
                if c > 0.0 && c < 1.0 {
                    cuts.push(2.0 * c.sqrt().asin());
                }
            }
            cuts.push(PI);
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut total = 0.0;
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                if b - a <= 0.0 {
                    continue;
                }
                let floor = FLOOR * profile.scale() * (b - a);
                total += tanh_sinh_floor(a, b, TOL, floor, |th, da, _| {
                    // near θ = 0 use the endpoint distance to keep s accurate
                    let th = if a == 0.0 { da } else { th };
                    let sh = (0.5 * th).sin();
                    profile.eval((lo2 + prod * sh * sh).sqrt())
                })
                .value;
            }
            2.0 * total
        }
        3 => {
            let lo = (dist - rho).abs();
            let hi = dist + rho;
            let mut cuts = vec![lo];
            cuts.extend(profile.breaks().into_iter().filter(|&s| s > lo && s < hi));
            cuts.push(hi);
            let mut total = 0.0;
            for w in cuts.windows(2) {
                if w[1] > w[0] {
                    let floor = FLOOR * profile.scale() * hi * (w[1] - w[0]);
                    total += tanh_sinh_floor(w[0], w[1], TOL, floor, |s, da, _| {
                        let s = if w[0] == 0.0 { da } else { s };
                        profile.eval(s) * s
                    })
                    .value;
                }
            }
            2.0 * PI * total / (rho * dist)
        }
        _ => f64::NAN,
    }
}

/// ∫_lo^hi shell(ρ) w(ρ) dρ, split where the shell integrand is not smooth.
/// `hi = ∞` is allowed when w decays integrably.
fn polar<W>(f: &DriftSpec, x: &[f64], lo: f64, hi: f64, extra_cuts: &[f64], weight: W) -> Result<f64>
where
    W: Fn(f64) -> f64,
{
    let d = f.d;
    if let DriftKind::Sampled { lo: s0, h, values } = &f.kind {
        // d = 1 only; piecewise linear, handled by adaptive Gauss–Kronrod
        let x0 = x[0];
        let s1 = s0 + h * (values.len() - 1) as f64;
        let reach = (x0 - s0).abs().max((x0 - s1).abs());
        let top = hi.min(reach);
        if top <= lo {
            return Ok(0.0);
        }
        let mut cuts: Vec<f64> = (0..values.len())
            .map(|i| (x0 - (s0 + i as f64 * h)).abs())
            .chain(extra_cuts.iter().copied())
            .filter(|&c| c > lo && c < top)
            .collect();
        cuts.push(lo);
        cuts.push(top);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += adaptive(w[0], w[1], 1e-10, |rho| {
                (f.magnitude(&[x0 + rho]) + f.magnitude(&[x0 - rho])) * weight(rho)
            })
            .value;
        }
        return Ok(total);
    }
    if d > 3 {
        return Err(Error::Unsupported("Kato functionals are implemented for d ≤ 3".into()));
    }
    let (_, profile) = f
        .radial()
        .ok_or_else(|| Error::Unsupported("field has no radial profile".into()))?;
    let dist = focus_distance(f, x);
    let mut top = hi;
    if let Some(s) = profile.support() {
        top = top.min(dist + s);
    }
    if top <= lo {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = vec![lo];
    for sb in profile.breaks() {
        cuts.push((dist - sb).abs());
        cuts.push(dist + sb);
    }
    cuts.extend_from_slice(extra_cuts);
    let mut cuts: Vec<f64> = cuts.into_iter().filter(|&c| c >= lo && c < top).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let p = profile.as_ref();
    let mut total = 0.0;
    for (k, &a) in cuts.iter().enumerate() {
        let b = cuts.get(k + 1).copied().unwrap_or(top);
        if b <= a {
            continue;
        }
        if b.is_finite() {
            let w = weight(a).abs().max(weight(0.5 * (a + b)).abs()).max(weight(b).abs());
            let floor = if w.is_finite() { FLOOR * p.scale() * sphere_area(d) * w * (b - a) } else { 0.0 };
            total += tanh_sinh_floor(a, b, 1e-10, floor, |rho, _, _| shell(p, d, dist, rho) * weight(rho)).value;
        } else {
            // ρ = a / u on (0, 1]
            let a = a.max(1e-300);
            total += tanh_sinh(0.0, 1.0, 1e-10, |u, du, _| {
                let u = u.max(du);
                let rho = a / u;
                shell(p, d, dist, rho) * weight(rho) * a / (u * u)
            })
            .value;
        }
    }
    Ok(total)
}

/// M_f(x, r) = ∫_{|x-y|<r} |f(y)| |x-y|^{-(d-1)} dy at one center.
pub fn kato_modulus_at(f: &DriftSpec, r: f64, x: &[f64]) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain("radius must be positive".into()));
    }
    polar(f, x, 0.0, r, &[], |_| 1.0)
}

/// Candidate centers for the supremum over x: the field's singular
/// points, the origin, and a 9^d lattice on the support box.
pub fn candidate_centers(f: &DriftSpec) -> Vec<Vec<f64>> {
    let d = f.d;
    let mut out: Vec<Vec<f64>> = Vec::new();
    for s in f.singular_points() {
        let mut c = vec![0.0; d];
        c[0] = s;
        out.push(c);
    }
    out.push(vec![0.0; d]);
    let half = f.support_radius().unwrap_or(1.0);
    let fc = f.focus();
    let n = 9usize;
    let total = n.pow(d as u32);
    for idx in 0..total {
        let mut c = vec![0.0; d];
        let mut rem = idx;
        for (k, ck) in c.iter_mut().enumerate() {
            let i = rem % n;
            rem /= n;
            let off = -half + 2.0 * half * i as f64 / (n - 1) as f64;
            *ck = if k == 0 { fc + off } else { off };
        }
        out.push(c);
    }
    if f.radial().is_some() {
        // the value depends on the distance to the focus only
        let mut seen: Vec<u64> = Vec::new();
        out.retain(|c| {
            let key = (focus_distance(f, c) * 1e12).round() as u64;
            if seen.contains(&key) {
                false
            } else {
                seen.push(key);
                true
            }
        });
    }
    out
}

fn candidate_sup<F: Fn(&[f64]) -> Result<f64>>(f: &DriftSpec, g: F) -> Result<f64> {
    let mut best: f64 = 0.0;
    for c in candidate_centers(f) {
        best = best.max(g(&c)?);
    }
    Ok(best)
}

/// M_f(r) over the candidate centers (a lower approximation of the true
/// supremum); sup |f| in dimension 1.
pub fn kato_modulus(f: &DriftSpec, r: f64) -> Result<KatoValue> {
    if !(r > 0.0) {
        return Err(Error::Domain("radius must be positive".into()));
    }
    if f.d == 1 {
        return Ok(KatoValue {
            value: f.bound_hint.unwrap_or(f64::INFINITY),
            tag: KatoTag::SupNorm,
        });
    }
    Ok(KatoValue {
        value: candidate_sup(f, |c| kato_modulus_at(f, r, c))?,
        tag: KatoTag::CandidateSup,
    })
}

pub fn kato_report(f: &DriftSpec, alpha: f64, radii: &[f64]) -> Result<KatoReport> {
    let mut moduli = Vec::with_capacity(radii.len());
    let mut tag = KatoTag::CandidateSup;
    for &r in radii {
        let v = kato_modulus(f, r)?;
        tag = v.tag;
        moduli.push(v.value);
    }
    let verdict = match tag {
        KatoTag::SupNorm => moduli.iter().all(|m| m.is_finite()),
        KatoTag::CandidateSup => {
            moduli.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9))
                && moduli.last().copied().unwrap_or(0.0) <= 0.1 * moduli.first().copied().unwrap_or(0.0)
        }
    };
    Ok(KatoReport {
        radii: radii.to_vec(),
        moduli,
        tag,
        verdict,
        gamma: gamma_exponent(alpha),
    })
}

/// H^β(r, x) = min(|x|^{-(d-1)}, r^β |x|^{-(d-1+2β)}).
pub fn h_kernel(d: usize, beta: f64, r: f64, x: &[f64]) -> Result<f64> {
    let n = norm(x);
    if n == 0.0 {
        return Err(Error::Singular("H kernel is singular at the origin".into()));
    }
    if !(beta > 0.5) || !(r > 0.0) {
        return Err(Error::Domain("H kernel needs β > 1/2 and r > 0".into()));
    }
    Ok(h_radial(d, beta, r, n))
}

fn h_radial(d: usize, beta: f64, r: f64, n: f64) -> f64 {
    let e = (d - 1) as f64;
    n.powf(-e).min(r.powf(beta) * n.powf(-e - 2.0 * beta))
}

/// H_f^β(r, x) = ∫ |f(y)| H^β(r, x - y) dy.
pub fn h_functional(f: &DriftSpec, beta: f64, r: f64, x: &[f64]) -> Result<f64> {
    if !(beta > 0.5) || !(r > 0.0) {
        return Err(Error::Domain("H functional needs β > 1/2 and r > 0".into()));
    }
    let sr = r.sqrt();
    let rb = r.powf(beta);
    let inner = polar(f, x, 0.0, sr, &[], |_| 1.0)?;
    let outer = polar(f, x, sr, f64::INFINITY, &[], |rho| rb * rho.powf(-2.0 * beta))?;
    Ok(inner + outer)
}

/// N^β(r, x) = β^{-(d-1)/2} |x|^{-(d-1)} Γ((d-1)/2, β|x|²/r).
pub fn n_kernel(d: usize, beta: f64, r: f64, x: &[f64]) -> Result<f64> {
    let n = norm(x);
    if n == 0.0 {
        return Err(Error::Singular("N kernel is singular at the origin".into()));
    }
    if !(beta > 0.0) || !(r > 0.0) {
        return Err(Error::Domain("N kernel needs β > 0 and r > 0".into()));
    }
    Ok(n_shell_weight(d, beta, r, n) * n.powf(-((d - 1) as f64)))
}

/// ρ^{d-1} N^β(r, ρ)
fn n_shell_weight(d: usize, beta: f64, r: f64, rho: f64) -> f64 {
    let s = (d as f64 - 1.0) / 2.0;
    beta.powf(-s) * upper_incomplete_gamma(s, beta * rho * rho / r)
}

/// N^β(r, x) by direct quadrature of ∫_0^r s^{-(d+1)/2} e^{-β|x|²/s} ds.
pub fn n_kernel_direct(d: usize, beta: f64, r: f64, x: &[f64]) -> Result<f64> {
    let n = norm(x);
    if n == 0.0 {
        return Err(Error::Singular("N kernel is singular at the origin".into()));
    }
    let c = beta * n * n;
    let e = (d as f64 + 1.0) / 2.0;
    // s = r e^{-w}, w ∈ [0, ∞); the integrand vanishes once c e^w / r is large
    let w_max = ((60.0 * r / c).max(1.0)).ln().max(0.0) + 4.0;
    let res = adaptive(0.0, w_max, 1e-13, |w| {
        let s = r * (-w).exp();
        s.powf(1.0 - e) * (-c / s).exp()
    });
    Ok(res.value)
}

/// ∫ |f(y)| N^β(r, x - y) dy.
pub fn n_functional(f: &DriftSpec, beta: f64, r: f64, x: &[f64]) -> Result<f64> {
    if !(beta > 0.0) || !(r > 0.0) {
        return Err(Error::Domain("N functional needs β > 0 and r > 0".into()));
    }
    let reach = (r * 50.0 / beta).sqrt();
    polar(f, x, 0.0, reach, &[], |rho| n_shell_weight(f.d, beta, r, rho))
}

/// sup over candidate centers of ∫ |f(y)| N^β(r, x - y) dy.
pub fn n_functional_sup(f: &DriftSpec, beta: f64, r: f64) -> Result<f64> {
    candidate_sup(f, |c| n_functional(f, beta, r, c))
}

/// Normalizing constant of φ(x) = K (1 - |x|²)⁴ on the unit ball.
pub fn mollifier_constant(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    1.0 / (sphere_area(d) * gamma(h) * gamma(5.0) / (2.0 * gamma(h + 5.0)))
}

/// φ_n(z) = n^d φ(n z) as a function of |z|.
pub fn mollifier(d: usize, n: u32, rho: f64) -> f64 {
    let nf = n as f64;
    let q = nf * rho;
    if q >= 1.0 {
        return 0.0;
    }
    let w = 1.0 - q * q;
    mollifier_constant(d) * nf.powi(d as i32) * w * w * w * w
}

/// Chebyshev points on [-reach, reach]; odd so that s = 0 is a node.
const TABLE_POINTS: usize = 257;

/// φ_n * F for a compactly supported radial profile, held as a Chebyshev
/// interpolant in s. The interpolant is analytic, so the polar quadratures
/// built on top of it converge as fast as on the presets themselves.
#[derive(Debug)]
struct MollifiedProfile {
    base: Arc<dyn RadialProfile>,
    d: usize,
    n: u32,
    reach: f64,
    /// (node, barycentric weight · value, barycentric weight) for the nodes
    /// reach·cos(kπ/(N-1))
    table: OnceLock<Vec<(f64, f64, f64)>>,
}

impl MollifiedProfile {
    /// (φ_n * F)(s) by quadrature.
    fn direct(&self, s: f64) -> f64 {
        let eps = 1.0 / self.n as f64;
        let mut cuts = vec![0.0];
        for sb in self.base.breaks() {
            for c in [(s - sb).abs(), s + sb] {
                if c > 0.0 && c < eps {
                    cuts.push(c);
                }
            }
        }
        cuts.push(eps);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let d = self.d;
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += tanh_sinh(w[0], w[1], 1e-10, |rho, _, _| {
                mollifier(d, self.n, rho) * rho.powi(d as i32 - 1) * shell(self.base.as_ref(), d, s, rho)
            })
            .value;
        }
        total
    }

    fn node(&self, k: usize) -> f64 {
        self.reach * (PI * k as f64 / (TABLE_POINTS - 1) as f64).cos()
    }

    fn table(&self) -> &[(f64, f64, f64)] {
        self.table.get_or_init(|| {
            // the profile is even: fill the nonnegative half and mirror
            let half = (TABLE_POINTS - 1) / 2;
            let mut values = vec![0.0; TABLE_POINTS];
            for k in 1..=half {
                let v = self.direct(self.node(k).abs());
                values[k] = v;
                values[TABLE_POINTS - 1 - k] = v;
            }
            values
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let mut w = if k % 2 == 0 { 1.0 } else { -1.0 };
                    if k == 0 || k == TABLE_POINTS - 1 {
                        w *= 0.5;
                    }
                    (self.node(k), w * v, w)
                })
                .collect()
        })
    }
}

impl RadialProfile for MollifiedProfile {
    fn eval(&self, s: f64) -> f64 {
        if s >= self.reach {
            return 0.0;
        }
        // barycentric formula of the second kind
        let (mut num, mut den) = (0.0, 0.0);
        for &(x, wf, w) in self.table() {
            let diff = s - x;
            if diff == 0.0 {
                return wf / w;
            }
            num += wf / diff;
            den += w / diff;
        }
        num / den
    }
    fn breaks(&self) -> Vec<f64> {
        vec![self.reach]
    }
    fn support(&self) -> Option<f64> {
        Some(self.reach)
    }
    fn scale(&self) -> f64 {
        self.table().iter().map(|&(_, wf, w)| (wf / w).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug)]
struct ScaledConstant(f64);

impl RadialProfile for ScaledConstant {
    fn eval(&self, _s: f64) -> f64 {
        self.0
    }
    fn scale(&self) -> f64 {
        self.0.abs()
    }
    fn breaks(&self) -> Vec<f64> {
        vec![]
    }
    fn support(&self) -> Option<f64> {
        None
    }
}

/// b_n = φ_n * b with φ(x) = K (1 - |x|²)⁴₊.
pub fn mollify(f: &DriftSpec, n: u32) -> Result<DriftSpec> {
    if n < 1 {
        return Err(Error::Domain("smoothing level must be at least 1".into()));
    }
    let (_, base) = f
        .radial()
        .ok_or_else(|| Error::Unsupported("mollification needs a radial preset".into()))?;
    let kind = DriftKind::Mollified {
        base: Box::new(f.kind.clone()),
        n,
    };
    let profile: Arc<dyn RadialProfile> = match base.support() {
        None => {
            // constant magnitude: the convolution is the mass of φ_n times it
            let d = f.d;
            let mass = sphere_area(d)
                * tanh_sinh(0.0, 1.0 / n as f64, 1e-13, |rho, _, _| mollifier(d, n, rho) * rho.powi(d as i32 - 1)).value;
            Arc::new(ScaledConstant(base.eval(0.0) * mass))
        }
        Some(s) => Arc::new(MollifiedProfile {
            base,
            d: f.d,
            n,
            reach: s + 1.0 / n as f64,
            table: OnceLock::new(),
        }),
    };
    let bound = f.bound_hint;
    Ok(DriftSpec::with_profile(f.d, kind, profile, bound))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_modulus_in_the_plane() {
        let f = DriftSpec::constant(2, 1.0);
        for &r in &[0.1, 0.5, 2.0] {
            let m = kato_modulus(&f, r).unwrap();
            assert!((m.value - 2.0 * PI * r).abs() < 1e-9, "r={r}: {}", m.value);
            assert_eq!(m.tag, KatoTag::CandidateSup);
        }
    }

    #[test]
    fn zero_field_vanishes() {
        let f = DriftSpec::zero(2);
        assert_eq!(kato_modulus(&f, 0.3).unwrap().value, 0.0);
        assert_eq!(h_functional(&f, 1.0, 0.3, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(n_functional_sup(&f, 1.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_modulus_is_sup_norm() {
        let f = DriftSpec::bump(1, 2.0, 0.0, 1.0).unwrap();
        let m = kato_modulus(&f, 0.2).unwrap();
        assert_eq!(m.tag, KatoTag::SupNorm);
        assert_eq!(m.value, 2.0);
    }

    #[test]
    fn h_kernel_examples() {
        assert_eq!(h_kernel(2, 1.0, 1.0, &[2.0, 0.0]).unwrap(), 0.125);
        let x = [0.6, 0.8];
        assert!((h_kernel(3, 1.5, 1.0, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(h_kernel(2, 1.0, 1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn h_functional_constant_closed_form() {
        // ω_d √r (1 + 1/(2β - 1))
        let f = DriftSpec::constant(2, 1.0);
        for &(beta, r) in &[(1.0, 0.25), (0.75, 1.0), (2.0, 0.04)] {
            let h = h_functional(&f, beta, r, &[0.3, -0.1]).unwrap();
            let e = 2.0 * PI * r.sqrt() * 2.0 * beta / (2.0 * beta - 1.0);
            assert!((h / e - 1.0).abs() < 1e-8, "β={beta} r={r}: {h} vs {e}");
        }
    }

    #[test]
    fn n_kernel_routes_agree() {
        let v = n_kernel(2, 1.0, 1.0, &[1.0, 0.0]).unwrap();
        let w = n_kernel_direct(2, 1.0, 1.0, &[1.0, 0.0]).unwrap();
        assert!((v / w - 1.0).abs() < 1e-8, "{v} vs {w}");
    }

    #[test]
    fn n_kernel_large_r_limit() {
        let v = n_kernel(3, 2.0, 1e12, &[0.0, 0.5, 0.0]).unwrap();
        let e = 0.5 * 4.0;
        assert!((v / e - 1.0).abs() < 1e-5);
    }

    #[test]
    fn mollifier_has_unit_mass() {
        for d in 1..=3 {
            let m = sphere_area(d)
                * tanh_sinh(0.0, 0.25, 1e-13, |r, _, _| mollifier(d, 4, r) * r.powi(d as i32 - 1)).value;
            assert!((m - 1.0).abs() < 1e-12, "d={d}: {m}");
        }
    }

    #[test]
    fn mollified_constant_is_constant() {
        let f = DriftSpec::constant(2, 0.7);
        let g = mollify(&f, 3).unwrap();
        assert!((g.first_component(&[4.0, -1.0]) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn mollified_profile_matches_direct_quadrature() {
        for f in [
            DriftSpec::bump(2, 1.0, 0.0, 1.0).unwrap(),
            DriftSpec::inverse_power(2, 1.0, 0.5, 1.0).unwrap(),
        ] {
            let (_, base) = f.radial().unwrap();
            let prof = MollifiedProfile {
                base,
                d: 2,
                n: 4,
                reach: 1.25,
                table: OnceLock::new(),
            };
            for &s in &[0.013, 0.2, 0.61, 0.97, 1.2] {
                let (u, v) = (prof.eval(s), prof.direct(s));
                assert!((u - v).abs() < 1e-7 * v.max(1.0), "s={s}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn mollified_bump_approaches_bump() {
        let f = DriftSpec::bump(1, 1.0, 0.0, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for n in [2, 4, 8, 16] {
            let g = mollify(&f, n).unwrap();
            let err = (0..=40)
                .map(|i| {
                    let x = -1.2 + 0.06 * i as f64;
                    (g.first_component(&[x]) - f.first_component(&[x])).abs()
                })
                .fold(0.0, f64::max);
            assert!(err < prev, "n={n}: {err} vs {prev}");
            prev = err;
        }
        assert!(prev < 0.02);
    }
}
