//! λ-resolvent u_λ(x) = ∫_0^∞ e^{-λt} p^a(t, x) dt and the operator U_λ.
//!
//! Point values use adaptive time quadrature on direct evaluations. Grid
//! operators use a fixed trapezoid rule in ln t over cached slices, so the
//! slice set is shared by every λ.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use super::{norm, radial_evaluation, slice, RadialSlice, StableParams};
use crate::drift::DriftSpec;
use crate::quad::adaptive;
use crate::special::sphere_area;
use crate::{Error, Result};

const LOG_STEP: f64 = 0.25;

fn density_at(params: &StableParams, t: f64, r: f64) -> f64 {
    radial_evaluation(params, t, r).map(|e| e.value).unwrap_or(f64::NAN)
}

/// u_λ(x) by adaptive quadrature split at t = |x|².
pub fn resolvent_density(params: &StableParams, lambda: f64, x: &[f64]) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain("λ must be positive".into()));
    }
    let r = norm(x);
    if r == 0.0 {
        if params.d >= 2 {
            return Err(Error::Singular("resolvent density diverges on the diagonal for d ≥ 2".into()));
        }
        // t = u² on [0, 1], then t = e^v
        let head = adaptive(0.0, 1.0, 1e-11, |u| {
            let t = u * u;
            if t == 0.0 {
                return 0.0;
            }
            2.0 * u * (-lambda * t).exp() * density_at(params, t, 0.0)
        });
        let v_max = (60.0 / lambda).max(1.0).ln() + 1.0;
        let tail = adaptive(0.0, v_max, 1e-11, |v| {
            let t = v.exp();
            t * (-lambda * t).exp() * density_at(params, t, 0.0)
        });
        return Ok(head.value + tail.value);
    }
    let r2 = r * r;
    let near = adaptive(0.0, r2, 1e-11, |t| {
        if t == 0.0 {
            return 0.0;
        }
        (-lambda * t).exp() * density_at(params, t, r)
    });
    let v_max = (1.0 + 60.0 / (lambda * r2)).ln();
    let far = adaptive(0.0, v_max, 1e-11, |v| {
        let t = r2 * v.exp();
        t * (-lambda * t).exp() * density_at(params, t, r)
    });
    let value = near.value + far.value;
    if !value.is_finite() {
        return Err(Error::Accuracy {
            estimate: f64::INFINITY,
            tolerance: 1e-10,
            context: "resolvent time quadrature".into(),
        });
    }
    Ok(value)
}

/// ∇u_λ(x) = -2π x u_λ^{(d+2)}(|x|).
pub fn resolvent_gradient(params: &StableParams, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
    let r = norm(x);
    if r == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    let mut e = vec![0.0; params.d + 2];
    e[0] = r;
    let lifted = resolvent_density(&params.with_dim(params.d + 2), lambda, &e)?;
    Ok(x.iter().map(|&xi| -2.0 * PI * xi * lifted).collect())
}

/// u_λ tabulated through a trapezoid rule in ln t over cached slices.
#[derive(Debug, Clone)]
pub struct ResolventProfile {
    pub params: StableParams,
    pub lambda: f64,
    weights: Vec<f64>,
    slices: Vec<Arc<RadialSlice>>,
    lifted: Vec<Arc<RadialSlice>>,
}

impl ResolventProfile {
    pub fn new(params: &StableParams, lambda: f64, with_lift: bool) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain("λ must be positive".into()));
        }
        let v_min = (1e-11 / lambda).ln();
        let v_max = (45.0 / lambda).ln();
        let k0 = (v_min / LOG_STEP).floor() as i64;
        let k1 = (v_max / LOG_STEP).ceil() as i64;
        let mut weights = Vec::new();
        let mut slices = Vec::new();
        let mut lifted = Vec::new();
        let lift = params.with_dim(params.d + 2);
        for k in k0..=k1 {
            let t = (k as f64 * LOG_STEP).exp();
            weights.push(LOG_STEP * t * (-lambda * t).exp());
            slices.push(slice(params, t)?);
            if with_lift {
                lifted.push(slice(&lift, t)?);
            }
        }
        Ok(Self {
            params: *params,
            lambda,
            weights,
            slices,
            lifted,
        })
    }

    /// u_λ(r)
    pub fn value(&self, r: f64) -> f64 {
        self.weights.iter().zip(&self.slices).map(|(w, s)| w * s.value(r)).sum()
    }

    /// u_λ^{(d+2)}(r), so that ∇u_λ(x) = -2π x u_λ^{(d+2)}(|x|).
    pub fn lifted_value(&self, r: f64) -> f64 {
        self.weights.iter().zip(&self.lifted).map(|(w, s)| w * s.value(r)).sum()
    }

    /// ∫_{|y|<ρ} u_λ(y) dy
    pub fn ball_integral(&self, rho: f64) -> f64 {
        let om = sphere_area(self.params.d);
        self.weights
            .iter()
            .zip(&self.slices)
            .map(|(w, s)| w * om * s.radial_integral(rho))
            .sum()
    }

    /// ∫_lo^hi u_λ(s) ds in dimension 1.
    pub fn line_integral(&self, lo: f64, hi: f64) -> f64 {
        let signed = |s: &RadialSlice, x: f64| x.signum() * s.radial_integral(x);
        self.weights
            .iter()
            .zip(&self.slices)
            .map(|(w, s)| w * (signed(s, hi) - signed(s, lo)))
            .sum()
    }

    /// ∫_{ℝ^d} u_λ = ∫ e^{-λt} (mass of p_t) dt; equals 1/λ for a conservative kernel.
    pub fn total(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.slices)
            .map(|(w, s)| w * s.total_mass())
            .sum()
    }
}

/// Uniform grid with n nodes lo + i h per axis in dimension d (1 or 2);
/// values are stored with the first axis varying slowest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformGrid {
    pub d: usize,
    pub lo: f64,
    pub h: f64,
    pub n: usize,
}

impl UniformGrid {
    pub fn new(d: usize, lo: f64, h: f64, n: usize) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::Unsupported("grid operators support d = 1 and d = 2".into()));
        }
        if !(h > 0.0) || n < 2 {
            return Err(Error::Domain("grid needs h > 0 and n ≥ 2".into()));
        }
        Ok(Self { d, lo, h, n })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        if self.d == 1 {
            vec![self.lo + idx as f64 * self.h]
        } else {
            vec![
                self.lo + (idx / self.n) as f64 * self.h,
                self.lo + (idx % self.n) as f64 * self.h,
            ]
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// f = far + compact, the compact part sampled on the grid and vanishing
/// at its edge; values outside the grid equal `far`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub far: f64,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn constant(grid: &UniformGrid, c: f64) -> Self {
        Self {
            far: c,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn sampled(grid: &UniformGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        Self {
            far: 0.0,
            values: grid.points().iter().map(|p| f(p)).collect(),
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(self.far.abs(), |m, v| m.max((v + self.far).abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventOutput {
    pub values: Vec<f64>,
    pub gradient: Option<Vec<Vec<f64>>>,
}

/// U_λ f and optionally ∇U_λ f at the grid nodes.
///
/// In d = 1 the compact part is treated as piecewise constant on cells and
/// integrated exactly against u_λ; in d = 2 off-center cells use point
/// values and the center cell the ball of equal area.
pub fn resolvent_apply(
    params: &StableParams,
    lambda: f64,
    f: &GridField,
    grid: &UniformGrid,
    with_gradient: bool,
) -> Result<ResolventOutput> {
    if grid.d != params.d {
        return Err(Error::Domain("grid and kernel dimensions differ".into()));
    }
    if f.values.len() != grid.len() {
        return Err(Error::Domain("field does not match the grid".into()));
    }
    let profile = ResolventProfile::new(params, lambda, with_gradient && grid.d == 2)?;
    let base = f.far * profile.total();
    let n = grid.n;
    let h = grid.h;
    match grid.d {
        1 => {
            let kernel: Vec<f64> = (0..n)
                .map(|q| profile.line_integral((q as f64 - 0.5) * h, (q as f64 + 0.5) * h))
                .collect();
            let half: Vec<f64> = (0..=n).map(|q| profile.value((q as f64 - 0.5) * h)).collect();
            let mut values = vec![base; n];
            let mut grads = vec![vec![0.0]; n];
            for (i, vi) in values.iter_mut().enumerate() {
                let mut acc = 0.0;
                let mut gacc = 0.0;
                for (j, &g) in f.values.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let q = i.abs_diff(j);
                    acc += g * kernel[q];
                    if with_gradient {
                        // u(z + h/2) - u(z - h/2) with z = x_i - y_j
                        let diff = half[q + 1] - half[q];
                        gacc += g * if i >= j { -diff } else { diff };
                    }
                }
                *vi += acc;
                grads[i][0] = gacc;
            }
            Ok(ResolventOutput {
                values,
                gradient: with_gradient.then_some(grads),
            })
        }
        _ => {
            let h2 = h * h;
            let center = profile.ball_integral(h / PI.sqrt());
            let mut kernel = vec![0.0; n * n];
            let mut gker = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    if a == 0 && b == 0 {
                        kernel[0] = center;
                        continue;
                    }
                    let r = h * ((a * a + b * b) as f64).sqrt();
                    kernel[a * n + b] = h2 * profile.value(r);
                    if with_gradient {
                        gker[a * n + b] = -2.0 * PI * h2 * profile.lifted_value(r);
                    }
                }
            }
            let mut values = vec![base; n * n];
            let mut grads = vec![vec![0.0, 0.0]; n * n];
            let nonzero: Vec<(usize, f64)> = f
                .values
                .iter()
                .enumerate()
                .filter(|(_, &g)| g != 0.0)
                .map(|(j, &g)| (j, g))
                .collect();
            for i in 0..n * n {
                let (i0, i1) = (i / n, i % n);
                let mut acc = 0.0;
                let (mut g0, mut g1) = (0.0, 0.0);
                for &(j, g) in &nonzero {
                    let (j0, j1) = (j / n, j % n);
                    let a = i0.abs_diff(j0);
                    let b = i1.abs_diff(j1);
                    acc += g * kernel[a * n + b];
                    if with_gradient {
                        let w = g * gker[a * n + b];
                        g0 += w * (i0 as f64 - j0 as f64) * h;
                        g1 += w * (i1 as f64 - j1 as f64) * h;
                    }
                }
                values[i] += acc;
                grads[i] = vec![g0, g1];
            }
            Ok(ResolventOutput {
                values,
                gradient: with_gradient.then_some(grads),
            })
        }
    }
}

/// ∇U_λ(b f) at the grid nodes for an e₁-directed drift.
pub fn gradient_resolvent_apply(
    params: &StableParams,
    lambda: f64,
    drift: &DriftSpec,
    f: &GridField,
    grid: &UniformGrid,
) -> Result<Vec<Vec<f64>>> {
    let points = grid.points();
    let bf = GridField {
        far: 0.0,
        values: points
            .iter()
            .zip(&f.values)
            .map(|(p, v)| drift.first_component(p) * (v + f.far))
            .collect(),
    };
    Ok(resolvent_apply(params, lambda, &bf, grid, true)?.gradient.unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub lambda0: f64,
    pub f_sup: f64,
    /// (λ, sup |∇U_λ(bf)|) at every probe
    pub probes: Vec<(f64, f64)>,
}

fn sup_gradient(params: &StableParams, lambda: f64, drift: &DriftSpec, f: &GridField, grid: &UniformGrid) -> Result<f64> {
    let g = gradient_resolvent_apply(params, lambda, drift, f, grid)?;
    Ok(g.iter().map(|v| norm(v)).fold(0.0, f64::max))
}

/// Smallest λ ≥ 1 (to relative precision `rel_tol`) with
/// sup |∇U_λ(bf)| ≤ ½ ‖f‖, found by doubling then bisection in ln λ.
pub fn contraction_threshold(
    params: &StableParams,
    drift: &DriftSpec,
    f: &GridField,
    grid: &UniformGrid,
    rel_tol: f64,
) -> Result<ContractionReport> {
    let f_sup = f.sup();
    let target = 0.5 * f_sup;
    let mut probes = Vec::new();
    let probe = |lambda: f64, probes: &mut Vec<(f64, f64)>| -> Result<bool> {
        let s = sup_gradient(params, lambda, drift, f, grid)?;
        probes.push((lambda, s));
        Ok(s <= target)
    };
    if probe(1.0, &mut probes)? {
        return Ok(ContractionReport {
            lambda0: 1.0,
            f_sup,
            probes,
        });
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while !probe(hi, &mut probes)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Fit("no contraction up to λ = 1e12".into()));
        }
    }
    while hi / lo > 1.0 + rel_tol {
        let mid = (lo * hi).sqrt();
        if probe(mid, &mut probes)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ContractionReport {
        lambda0: hi,
        f_sup,
        probes,
    })
}
