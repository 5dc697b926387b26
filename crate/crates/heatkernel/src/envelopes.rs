//! Gaussian and Gaussian-plus-polynomial envelopes, empirical sandwich
//! fits, and the three-point integral inequality.

use serde::Serialize;

use crate::kato::{gamma_exponent, h_kernel};
use crate::quad::adaptive;
use crate::stable_kernel::{norm, slice, StableParams};
use crate::{Error, Result};

/// g_{d,β}(t, x) = t^{-d/2} exp(-β|x|²/t).
pub fn gaussian_g(d: usize, beta: f64, t: f64, x: &[f64]) -> f64 {
    gaussian_radial(d, beta, t, norm(x))
}

pub fn gaussian_radial(d: usize, beta: f64, t: f64, r: f64) -> f64 {
    t.powf(-(d as f64) / 2.0) * (-beta * r * r / t).exp()
}

/// Dimension and jump parameters that fix the envelope family q^a_{d,β}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Family {
    pub d: usize,
    pub alpha: f64,
    pub a: f64,
}

impl Family {
    pub fn of(params: &StableParams) -> Self {
        Self {
            d: params.d,
            alpha: params.alpha,
            a: params.a,
        }
    }

    pub fn lifted(&self, k: usize) -> Self {
        Self { d: self.d + k, ..*self }
    }

    /// q^a_{d,β}(t, r) = g_{d,β}(t, r) + min(t^{-d/2}, a^α t r^{-(d+α)}).
    pub fn q(&self, beta: f64, t: f64, r: f64) -> f64 {
        self.gaussian(beta, t, r) + self.polynomial(t, r)
    }

    pub fn gaussian(&self, beta: f64, t: f64, r: f64) -> f64 {
        gaussian_radial(self.d, beta, t, r)
    }

    pub fn polynomial(&self, t: f64, r: f64) -> f64 {
        let cap = t.powf(-(self.d as f64) / 2.0);
        if r == 0.0 {
            return cap;
        }
        cap.min(self.a.powf(self.alpha) * t * r.powf(-(self.d as f64 + self.alpha)))
    }
}

pub fn q_envelope(params: &StableParams, beta: f64, t: f64, x: &[f64]) -> f64 {
    Family::of(params).q(beta, t, norm(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeParams {
    pub beta: f64,
    pub c: f64,
}

impl EnvelopeParams {
    pub fn new(beta: f64, c: f64) -> Result<Self> {
        if !(beta > 0.0 && c > 0.0) {
            return Err(Error::Domain("envelope needs β > 0 and C > 0".into()));
        }
        Ok(Self { beta, c })
    }
}

/// A positive field value at (t, |x|).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticePoint {
    pub t: f64,
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichFit {
    pub family: Family,
    pub lower: EnvelopeParams,
    pub upper: EnvelopeParams,
    pub lattice_size: usize,
    /// worst relative violation of either bound on the lattice
    pub max_violation: f64,
    /// upper.c / lower.c
    pub tightness: f64,
}

/// Geometric grid of candidate β with ratio √2 over [1/16, 4].
pub fn beta_grid() -> Vec<f64> {
    (0..=12).map(|k| 2f64.powf(-4.0 + 0.5 * k as f64)).collect()
}

/// Least upper and greatest lower constants over the candidate β grid.
pub fn fit_sandwich(family: Family, points: &[LatticePoint], betas: &[f64]) -> Result<SandwichFit> {
    fit_envelope(family, points, betas, |beta, i| family.q(beta, points[i].t, points[i].r))
}

/// Same fit against the Gaussian part g_{d,β} alone.
pub fn fit_gaussian_sandwich(family: Family, points: &[LatticePoint], betas: &[f64]) -> Result<SandwichFit> {
    fit_envelope(family, points, betas, |beta, i| family.gaussian(beta, points[i].t, points[i].r))
}

/// One (β, C) pair per side valid for every family at once, each lattice
/// measured against its own q^a. The reported family is the last one.
pub fn fit_sandwich_uniform(sets: &[(Family, Vec<LatticePoint>)], betas: &[f64]) -> Result<SandwichFit> {
    let last = sets.last().ok_or_else(|| Error::Fit("no families to fit".into()))?.0;
    let mut points = Vec::new();
    let mut owner = Vec::new();
    for (fam, pts) in sets {
        points.extend_from_slice(pts);
        owner.extend(std::iter::repeat_n(*fam, pts.len()));
    }
    fit_envelope(last, &points, betas, |beta, i| owner[i].q(beta, points[i].t, points[i].r))
}

fn fit_envelope(
    family: Family,
    points: &[LatticePoint],
    betas: &[f64],
    envelope: impl Fn(f64, usize) -> f64,
) -> Result<SandwichFit> {
    if points.is_empty() || betas.is_empty() {
        return Err(Error::Fit("empty lattice or β grid".into()));
    }
    if let Some(p) = points.iter().find(|p| !(p.value > 0.0) || !p.value.is_finite()) {
        return Err(Error::Fit(format!(
            "field is not positive at t={}, r={}: {}",
            p.t, p.r, p.value
        )));
    }
    let mut best_upper: Option<EnvelopeParams> = None;
    let mut best_lower: Option<EnvelopeParams> = None;
    for &beta in betas {
        let mut hi: f64 = 0.0;
        let mut lo = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            let ratio = p.value / envelope(beta, i);
            hi = hi.max(ratio);
            lo = lo.min(ratio);
        }
        if best_upper.is_none_or(|u| hi < u.c) {
            best_upper = Some(EnvelopeParams { beta, c: hi });
        }
        if lo > 0.0 && best_lower.is_none_or(|l| lo > l.c) {
            best_lower = Some(EnvelopeParams { beta, c: lo });
        }
    }
    let upper = best_upper.unwrap();
    let lower = best_lower.ok_or_else(|| Error::Fit("no positive lower constant".into()))?;
    let mut max_violation: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        let up = upper.c * envelope(upper.beta, i);
        let lo = lower.c * envelope(lower.beta, i);
        max_violation = max_violation.max((p.value - up) / p.value).max((lo - p.value) / p.value);
    }
    // relative rounding of the ratios themselves
    if max_violation < 1e-12 {
        max_violation = 0.0;
    }
    Ok(SandwichFit {
        family,
        lower,
        upper,
        lattice_size: points.len(),
        max_violation,
        tightness: upper.c / lower.c,
    })
}

/// Least-squares slope of ln value against ln r.
pub fn tail_slope(points: &[(f64, f64)]) -> Result<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(r, v)| *r > 0.0 && *v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    if logs.len() < 2 {
        return Err(Error::Fit("tail slope needs two positive points".into()));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("tail slope needs distinct radii".into()));
    }
    Ok(sxy / sxx)
}

/// Log-spaced lattice covering both |x|² < t and |x|² > t: times
/// T·2^{-k}, k < n_t, and radii √t·2^{j/2·refine}, plus the origin.
pub fn log_lattice(t_max: f64, n_t: usize, refine: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let refine = refine.max(1);
    for k in 0..n_t * refine {
        let t = t_max * 2f64.powf(-(k as f64) / refine as f64);
        out.push((t, 0.0));
        for j in -8 * refine as i64..=16 * refine as i64 {
            out.push((t, t.sqrt() * 2f64.powf(j as f64 / (2 * refine) as f64)));
        }
    }
    out
}

/// Free kernel values on a lattice, read from the cached radial slices.
pub fn free_kernel_lattice(params: &StableParams, lattice: &[(f64, f64)]) -> Result<Vec<LatticePoint>> {
    lattice
        .iter()
        .map(|&(t, r)| {
            let s = slice(params, t)?;
            Ok(LatticePoint { t, r, value: s.value(r) })
        })
        .collect()
}

/// |∇p^a(t, x)| = 2π|x| p^a_{d+2}(t, |x|) on a lattice (origin excluded).
pub fn free_gradient_lattice(params: &StableParams, lattice: &[(f64, f64)]) -> Result<Vec<LatticePoint>> {
    let lifted = params.with_dim(params.d + 2);
    lattice
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(t, r)| {
            let s = slice(&lifted, t)?;
            Ok(LatticePoint {
                t,
                r,
                value: 2.0 * std::f64::consts::PI * r * s.value(r),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreePSample {
    pub t: f64,
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub z: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreePReport {
    pub gamma: f64,
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
}

fn dist(d: usize, u: &[f64; 3], v: &[f64; 3]) -> f64 {
    (0..d).map(|k| (u[k] - v[k]) * (u[k] - v[k])).sum::<f64>().sqrt()
}

/// ∫_0^t q_{d,β₁}(t-s, x-z) q_{d+1,β₂}(s, z-y) ds.
pub fn three_p_lhs(family: Family, beta1: f64, beta2: f64, t: f64, rxz: f64, rzy: f64) -> f64 {
    let lifted = family.lifted(1);
    let f = |s: f64| family.q(beta1, t - s, rxz) * lifted.q(beta2, s, rzy);
    // s = (t/2)u² near 0 and t - s = (t/2)u² near t
    let h = 0.5 * t;
    let left = adaptive(0.0, 1.0, 1e-10, |u| f(h * u * u) * 2.0 * h * u);
    let right = adaptive(0.0, 1.0, 1e-10, |u| f(t - h * u * u) * 2.0 * h * u);
    left.value + right.value
}

/// Empirical constant of the three-point inequality on a sample set.
pub fn three_p_check(params: &StableParams, beta1: f64, beta2: f64, samples: &[ThreePSample]) -> Result<ThreePReport> {
    if !(beta1 > 0.0 && beta2 > beta1) {
        return Err(Error::Domain("three-point check needs 0 < β₁ < β₂".into()));
    }
    let d = params.d;
    if d > 3 {
        return Err(Error::Unsupported("three-point samples are stored in three coordinates".into()));
    }
    let family = Family::of(params);
    let gamma = gamma_exponent(params.alpha);
    let mut ratios = Vec::with_capacity(samples.len());
    for s in samples {
        let rxz = dist(d, &s.x, &s.z);
        let rzy = dist(d, &s.z, &s.y);
        let rxy = dist(d, &s.x, &s.y);
        if rxz == 0.0 || rzy == 0.0 {
            return Err(Error::Singular("three-point sample needs z ≠ x and z ≠ y".into()));
        }
        let lhs = three_p_lhs(family, beta1, beta2, s.t, rxz, rzy);
        let mut e = [0.0; 3];
        e[0] = 1.0;
        let hx = h_kernel(d, gamma, s.t, &e[..d].iter().map(|v| v * rxz).collect::<Vec<_>>())?;
        let hy = h_kernel(d, gamma, s.t, &e[..d].iter().map(|v| v * rzy).collect::<Vec<_>>())?;
        let rhs = (hx + hy) * family.q(beta1, s.t, rxy);
        ratios.push(lhs / rhs);
    }
    let sup_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ThreePReport { gamma, ratios, sup_ratio })
}
