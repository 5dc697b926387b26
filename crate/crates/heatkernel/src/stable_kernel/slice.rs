//! Tabulated radial profile of the free density at a fixed time.
//!
//! Nodes: the origin, a geometric core grid up to the core radius, and a
//! geometric far grid out to the radius where the tail law is accurate to
//! ~1e-11 in mass. Interpolation is cubic Hermite in (ln r, ln p) with exact
//! slopes from the (d+2) lift.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use super::{levy_constant_unchecked, radial_evaluation, StableParams};
use crate::quad::GaussLegendre;
use crate::special::sphere_area;
use crate::{Error, Result};

pub const SLICE_NODES: usize = 256;
const CORE_NODES: usize = 191;
const FAR_NODES: usize = 64;
const CORE_SPAN: f64 = 1e-4;

fn gl4() -> &'static GaussLegendre {
    static GL: OnceLock<GaussLegendre> = OnceLock::new();
    GL.get_or_init(|| GaussLegendre::new(4))
}

#[derive(Debug, Clone)]
pub struct RadialSlice {
    pub params: StableParams,
    pub t: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// p_{d+2}(t, r) at the nodes
    pub lifted: Vec<f64>,
    /// largest quadrature error estimate among the nodes
    pub max_error: f64,
    /// (left, right) log-log slopes per interval after limiting
    slopes: Vec<(f64, f64)>,
    /// ∫_0^{r_i} s^{d-1} p ds
    cum: Vec<f64>,
    /// ∫_0^{r_i} s^d p ds
    mom: Vec<f64>,
    tail_coef: f64,
}

impl RadialSlice {
    pub fn build(params: &StableParams, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Domain("time must be positive".into()));
        }
        let d = params.d;
        let alpha = params.alpha;
        let levy = levy_constant_unchecked(d, alpha);
        let tail_coef = params.jump_weight() * levy * t;
        let r_core = params.core_radius(t);
        let s_far = (1e-11 * alpha / (sphere_area(d) * levy)).powf(1.0 / (2.0 * alpha));
        let r_far = (4.0 * r_core).max(params.stable_scale(t) / s_far);

        let mut radii = Vec::with_capacity(SLICE_NODES);
        radii.push(0.0);
        let r1 = r_core * CORE_SPAN;
        for k in 0..CORE_NODES {
            radii.push(r1 * (r_core / r1).powf(k as f64 / (CORE_NODES - 1) as f64));
        }
        for k in 1..=FAR_NODES {
            radii.push(r_core * (r_far / r_core).powf(k as f64 / FAR_NODES as f64));
        }
        *radii.last_mut().unwrap() = r_far;

        let evals: Vec<_> = radii
            .par_iter()
            .map(|&r| radial_evaluation(params, t, r))
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = evals.iter().map(|e| e.value.max(f64::MIN_POSITIVE)).collect();
        let lifted: Vec<f64> = evals.iter().map(|e| e.lifted).collect();
        let max_error = evals.iter().map(|e| e.error).fold(0.0, f64::max);

        let node_slope = |i: usize| -2.0 * PI * radii[i] * radii[i] * lifted[i] / values[i];
        let mut slopes = Vec::with_capacity(SLICE_NODES - 1);
        slopes.push((0.0, 0.0));
        for i in 1..SLICE_NODES - 1 {
            let du = (radii[i + 1] / radii[i]).ln();
            let delta = (values[i + 1] / values[i]).ln() / du;
            slopes.push(limit(node_slope(i), node_slope(i + 1), delta));
        }

        let mut slice = Self {
            params: *params,
            t,
            radii,
            values,
            lifted,
            max_error,
            slopes,
            cum: Vec::new(),
            mom: Vec::new(),
            tail_coef,
        };
        let gl = gl4();
        let mut pieces: Vec<(f64, f64)> = (0..SLICE_NODES - 1)
            .map(|i| {
                let (lo, hi) = (slice.radii[i], slice.radii[i + 1]);
                let mut c = 0.0;
                let mut m = 0.0;
                for (x, w) in gl.mapped(lo, hi) {
                    let base = w * x.powi(d as i32 - 1) * slice.value(x);
                    c += base;
                    m += base * x;
                }
                (c, m)
            })
            .collect();
        let mut cum = Vec::with_capacity(SLICE_NODES);
        let mut mom = Vec::with_capacity(SLICE_NODES);
        cum.push(0.0);
        mom.push(0.0);
        for (c, m) in pieces.drain(..) {
            cum.push(cum.last().unwrap() + c);
            mom.push(mom.last().unwrap() + m);
        }

        slice.cum = cum;
        slice.mom = mom;
        Ok(slice)
    }

    pub fn r_far(&self) -> f64 {
        self.radii[SLICE_NODES - 1]
    }

    pub fn on_diagonal(&self) -> f64 {
        self.values[0]
    }

    fn exponent(&self) -> f64 {
        self.params.d as f64 + self.params.alpha
    }

    fn interval(&self, r: f64) -> usize {
        self.radii.partition_point(|&x| x <= r).saturating_sub(1)
    }

    /// p(t, r), interpolated.
    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.r_far() {
            return self.tail_coef * r.powf(-self.exponent());
        }
        let i = self.interval(r);
        if i == 0 {
            let r1 = self.radii[1];
            let d1 = -2.0 * PI * r1 * self.lifted[1];
            let s = r / r1;
            let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
            let h01 = s * s * (3.0 - 2.0 * s);
            let h11 = s * s * (s - 1.0);
            return h00 * self.values[0] + h01 * self.values[1] + h11 * r1 * d1;
        }
        let (u0, u1) = (self.radii[i].ln(), self.radii[i + 1].ln());
        let (v0, v1) = (self.values[i].ln(), self.values[i + 1].ln());
        let (m0, m1) = self.slopes[i];
        let hu = u1 - u0;
        let s = (r.ln() - u0) / hu;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        (h00 * v0 + h10 * hu * m0 + h01 * v1 + h11 * hu * m1).exp()
    }

    /// ∫_0^r s^{d-1} p(t, s) ds.
    pub fn radial_integral(&self, r: f64) -> f64 {
        self.partial(r.abs(), 0)
    }

    /// ∫_0^r s^d p(t, s) ds.
    pub fn radial_moment(&self, r: f64) -> f64 {
        self.partial(r.abs(), 1)
    }

    fn partial(&self, r: f64, extra: i32) -> f64 {
        let table = if extra == 0 { &self.cum } else { &self.mom };
        let d = self.params.d as i32;
        let rf = self.r_far();
        if r >= rf {
            let end = table[SLICE_NODES - 1];
            let e = (d - 1 + extra) as f64 - self.exponent() + 1.0;
            let add = if e.abs() < 1e-14 {
                (r / rf).ln()
            } else {
                (r.powf(e) - rf.powf(e)) / e
            };
            return end + self.tail_coef * add;
        }
        let i = self.interval(r);
        let lo = self.radii[i];
        if r == lo {
            return table[i];
        }
        let part: f64 = gl4()
            .mapped(lo, r)
            .map(|(x, w)| w * x.powi(d - 1 + extra) * self.value(x))
            .sum();
        table[i] + part
    }

    /// ∫_{ℝ^d} p(t, x) dx with the tail law beyond the last node.
    pub fn total_mass(&self) -> f64 {
        let alpha = self.params.alpha;
        sphere_area(self.params.d)
            * (self.cum[SLICE_NODES - 1] + self.tail_coef * self.r_far().powf(-alpha) / alpha)
    }
}

/// Fritsch–Carlson limiter on a pair of endpoint slopes.
fn limit(m0: f64, m1: f64, delta: f64) -> (f64, f64) {
    if delta == 0.0 {
        return (0.0, 0.0);
    }
    let a = (m0 / delta).max(0.0);
    let b = (m1 / delta).max(0.0);
    let s = a * a + b * b;
    if s > 9.0 {
        let tau = 3.0 / s.sqrt();
        (tau * a * delta, tau * b * delta)
    } else {
        (a * delta, b * delta)
    }
}

type Key = (usize, u64, u64, u64);

/// Shared slice for (params, t); built once per key.
pub fn slice(params: &StableParams, t: f64) -> Result<Arc<RadialSlice>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<OnceLock<Result<Arc<RadialSlice>>>>>>> = OnceLock::new();
    let key = (params.d, params.alpha.to_bits(), params.a.to_bits(), t.to_bits());
    let cell = {
        let mut map = CACHE.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap();
        map.entry(key).or_default().clone()
    };
    cell.get_or_init(|| RadialSlice::build(params, t).map(Arc::new)).clone()
}
