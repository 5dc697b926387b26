//! Translation-invariant kernels indexed by grid offsets, and the transfer
//! sum out(y_j) = Σ_m φ(z_m) K(z_m - y_j).
//!
//! Two representations per time: point samples, accurate once the kernel
//! spans a couple of cells, and cell-exact weights for the sharp early
//! times. The switch sits at s = h²/2, where point sampling of a heat
//! kernel aliases at the e^{-2π²} ≈ 1e-9 level.

use std::f64::consts::PI;

use super::grid::SpaceTimeGrid;
use crate::quad::GaussLegendre;
use crate::stable_kernel::{slice, RadialSlice, StableParams};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Kernel {
    pub d: usize,
    pub reach: usize,
    pub data: Vec<f64>,
}

impl Kernel {
    pub fn zeros(d: usize, reach: usize) -> Self {
        let w = 2 * reach + 1;
        Self {
            d,
            reach,
            data: vec![0.0; w.pow(d as u32)],
        }
    }

    pub fn from_fn(d: usize, reach: usize, mut f: impl FnMut(i64, i64) -> f64) -> Self {
        let mut k = Self::zeros(d, reach);
        let r = reach as i64;
        if d == 1 {
            for q in -r..=r {
                k.data[(q + r) as usize] = f(q, 0);
            }
        } else {
            let w = 2 * r + 1;
            for q1 in -r..=r {
                for q2 in -r..=r {
                    k.data[((q1 + r) * w + q2 + r) as usize] = f(q1, q2);
                }
            }
        }
        k
    }

    #[inline]
    pub fn at(&self, q1: i64, q2: i64) -> f64 {
        let r = self.reach as i64;
        if self.d == 1 {
            self.data[(q1 + r) as usize]
        } else {
            self.data[((q1 + r) * (2 * r + 1) + q2 + r) as usize]
        }
    }

    pub fn axpy(&mut self, c: f64, other: &Kernel) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn scaled(&self, c: f64) -> Kernel {
        Kernel {
            d: self.d,
            reach: self.reach,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }
}

/// Time below which the cell-exact representation is used.
pub(crate) fn switch_time(grid: &SpaceTimeGrid) -> f64 {
    0.5 * grid.h() * grid.h()
}

fn gl16() -> &'static GaussLegendre {
    static GL: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    GL.get_or_init(|| GaussLegendre::new(16))
}

/// ∫_0^x p in dimension 1 (odd in x).
fn signed_integral(s: &RadialSlice, x: f64) -> f64 {
    x.signum() * s.radial_integral(x.abs())
}

/// ∫ over [0, X] × [0, Y] of a radial density in the plane (signed
/// for negative corners).
fn corner_mass(s: &RadialSlice, x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let sign = x.signum() * y.signum();
    let (x, y) = (x.abs(), y.abs());
    let th = y.atan2(x);
    let gl = gl16();
    let a = gl.integrate(0.0, th, |t| s.radial_integral(x / t.cos()));
    let b = gl.integrate(th, 0.5 * PI, |t| s.radial_integral(y / t.sin()));
    sign * (a + b)
}

fn rect_mass(s: &RadialSlice, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    corner_mass(s, x1, y1) - corner_mass(s, x0, y1) - corner_mass(s, x1, y0) + corner_mass(s, x0, y0)
}

/// Masses of the node-centred cells [(q - ½)h, (q + ½)h]² for |q_i| ≤ reach,
/// from corner masses on the half-integer lattice.
fn plane_cell_masses(s: &RadialSlice, h: f64, reach: usize) -> Kernel {
    let r = reach as i64;
    let w = (2 * r + 2) as usize;
    // corner (i, j) sits at ((i - r - ½)h, (j - r - ½)h) for i, j in 0..w
    let mut corners = vec![0.0; w * w];
    for i in 0..w {
        for j in 0..w {
            let x = (i as f64 - r as f64 - 0.5) * h;
            let y = (j as f64 - r as f64 - 0.5) * h;
            corners[i * w + j] = corner_mass(s, x, y);
        }
    }
    let c = |i: i64, j: i64| corners[(i + r) as usize * w + (j + r) as usize];
    Kernel::from_fn(2, reach, |q1, q2| c(q1 + 1, q2 + 1) - c(q1, q2 + 1) - c(q1 + 1, q2) + c(q1, q2))
}

/// Mass of p^a(t, · - x_node) inside the union of node cells
/// [-L - h/2, L + h/2]^d.
pub(crate) fn box_mass(params: &StableParams, grid: &SpaceTimeGrid, t: f64, node: usize) -> Result<f64> {
    let s = slice(&params.with_dim(grid.d), t)?;
    let e = grid.half_width + 0.5 * grid.h();
    let x = grid.point(node);
    Ok(if grid.d == 1 {
        signed_integral(&s, e - x[0]) - signed_integral(&s, -e - x[0])
    } else {
        rect_mass(&s, -e - x[0], e - x[0], -e - x[1], e - x[1])
    })
}

/// p^a(t, qh) at every offset.
pub(crate) fn free_point(params: &StableParams, grid: &SpaceTimeGrid, t: f64) -> Result<Kernel> {
    let s = slice(&params.with_dim(grid.d), t)?;
    let h = grid.h();
    Ok(Kernel::from_fn(grid.d, grid.n, |q1, q2| {
        s.value(h * ((q1 * q1 + q2 * q2) as f64).sqrt())
    }))
}

/// Cell-exact density at time t: hat-function averages in d = 1, averages
/// over node-centred cells in d = 2.
pub(crate) fn free_smoothed(params: &StableParams, grid: &SpaceTimeGrid, t: f64) -> Result<Kernel> {
    let s = slice(&params.with_dim(grid.d), t)?;
    let h = grid.h();
    if grid.d == 1 {
        // C(q) = ∫_{qh}^{(q+1)h} p, D(q) = ∫_{qh}^{(q+1)h} (w - qh) p
        let n = grid.n as i64;
        let cells: Vec<(f64, f64)> = (-n - 1..=n)
            .map(|q| {
                let (a, b) = (q as f64 * h, (q + 1) as f64 * h);
                let c = signed_integral(&s, b) - signed_integral(&s, a);
                let m = s.radial_moment(b.abs()) - s.radial_moment(a.abs());
                (c, m - a * c)
            })
            .collect();
        let cell = |q: i64| cells[(q + n + 1) as usize];
        Ok(Kernel::from_fn(1, grid.n, |q, _| {
            let (_, dl) = cell(q - 1);
            let (c, dr) = cell(q);
            (dl / h + c - dr / h) / h
        }))
    } else {
        Ok(plane_cell_masses(&s, h, grid.n).scaled(1.0 / (h * h)))
    }
}

/// Free density in the representation suited to time t.
pub(crate) fn free_rep(params: &StableParams, grid: &SpaceTimeGrid, t: f64) -> Result<Kernel> {
    if t >= switch_time(grid) {
        free_point(params, grid, t)
    } else {
        free_smoothed(params, grid, t)
    }
}

/// Weights A(q) with Σ_m φ(z_m) A(m - j) ≈ ∫ φ(z) ∂_{z₁} p^a(s, z - y_j) dz.
pub(crate) fn drift_kernel(params: &StableParams, grid: &SpaceTimeGrid, s: f64) -> Result<Kernel> {
    if s >= switch_time(grid) {
        drift_point(params, grid, s)
    } else {
        drift_smoothed(params, grid, s)
    }
}

/// h^d ∂₁p^a(s, qh), with ∂₁p_d(x) = -2π x₁ p_{d+2}(|x|).
pub(crate) fn drift_point(params: &StableParams, grid: &SpaceTimeGrid, s: f64) -> Result<Kernel> {
    let h = grid.h();
    let lift = slice(&params.with_dim(grid.d + 2), s)?;
    let vol = grid.cell();
    Ok(Kernel::from_fn(grid.d, grid.n, |q1, q2| {
        if q1 == 0 {
            return 0.0;
        }
        let r = h * ((q1 * q1 + q2 * q2) as f64).sqrt();
        -2.0 * PI * q1 as f64 * h * lift.value(r) * vol
    }))
}

/// Integration by parts onto φ: piecewise-linear φ in d = 1, central
/// differences against exact cell masses in d = 2.
pub(crate) fn drift_smoothed(params: &StableParams, grid: &SpaceTimeGrid, s: f64) -> Result<Kernel> {
    let h = grid.h();
    let sl = slice(&params.with_dim(grid.d), s)?;
    if grid.d == 1 {
        // A(q) = (C(q) - C(q-1)) / h with C(q) the mass of [qh, (q+1)h]
        let n = grid.n as i64;
        let c: Vec<f64> = (-n - 1..=n)
            .map(|q| signed_integral(&sl, (q + 1) as f64 * h) - signed_integral(&sl, q as f64 * h))
            .collect();
        let cell = |q: i64| c[(q + n + 1) as usize];
        Ok(Kernel::from_fn(1, grid.n, |q, _| (cell(q) - cell(q - 1)) / h))
    } else {
        let mc = plane_cell_masses(&sl, h, grid.n + 1);
        Ok(Kernel::from_fn(2, grid.n, |q1, q2| (mc.at(q1 + 1, q2) - mc.at(q1 - 1, q2)) / (2.0 * h)))
    }
}

/// out[j] += Σ_m φ[m] K(m - j).
pub(crate) fn transfer(grid: &SpaceTimeGrid, phi: &[f64], k: &Kernel, out: &mut [f64]) {
    let support: Vec<(usize, f64)> = phi
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(m, v)| (m, *v))
        .collect();
    if support.is_empty() {
        return;
    }
    if grid.d == 1 {
        let r = k.reach as i64;
        for (j, o) in out.iter_mut().enumerate() {
            let base = r - j as i64;
            let mut acc = 0.0;
            for &(m, v) in &support {
                acc += v * k.data[(m as i64 + base) as usize];
            }
            *o += acc;
        }
    } else {
        for (j, o) in out.iter_mut().enumerate() {
            let [j1, j2] = grid.split(j);
            let mut acc = 0.0;
            for &(m, v) in &support {
                let [m1, m2] = grid.split(m);
                acc += v * k.at(m1 as i64 - j1 as i64, m2 as i64 - j2 as i64);
            }
            *o += acc;
        }
    }
}

/// Row y_j ↦ K(y_j - x_node).
pub(crate) fn shifted(grid: &SpaceTimeGrid, k: &Kernel, node: usize) -> Vec<f64> {
    let [n1, n2] = grid.split(node);
    (0..grid.len())
        .map(|j| {
            let [j1, j2] = grid.split(j);
            k.at(j1 as i64 - n1 as i64, j2 as i64 - n2 as i64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize) -> StableParams {
        StableParams::new(d, 1.5, 1.0, 2.0).unwrap()
    }

    #[test]
    fn smoothed_representation_keeps_mass_and_centre() {
        let g = SpaceTimeGrid::new(1, 4.0, 64, 1.0, 4).unwrap();
        for &t in &[1e-5, 1e-3, 0.05] {
            let k = free_smoothed(&params(1), &g, t).unwrap();
            let mass: f64 = k.data.iter().sum::<f64>() * g.h();
            let first: f64 = (-64i64..=64).map(|q| q as f64 * k.at(q, 0)).sum();
            assert!((mass - 1.0).abs() < 2e-3, "t={t}: {mass}");
            assert!(first.abs() < 1e-12);
        }
    }

    #[test]
    fn representations_agree_once_resolved() {
        let g = SpaceTimeGrid::new(1, 4.0, 64, 1.0, 4).unwrap();
        let t = 0.2;
        let a = free_point(&params(1), &g, t).unwrap();
        let b = free_smoothed(&params(1), &g, t).unwrap();
        // hat averages differ from samples by about h² p''/12
        let peak = a.at(0, 0);
        for q in -10..=10 {
            assert!((a.at(q, 0) - b.at(q, 0)).abs() < 5e-3 * peak, "q={q}");
        }
    }

    #[test]
    fn drift_kernels_match_across_the_switch() {
        for d in [1usize, 2] {
            let g = SpaceTimeGrid::new(d, 2.0, 16, 1.0, 4).unwrap();
            let s = 4.0 * g.h() * g.h();
            let point = drift_point(&params(d), &g, s).unwrap();
            let exact = drift_smoothed(&params(d), &g, s).unwrap();
            let scale = point.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in point.data.iter().zip(&exact.data) {
                assert!((a - b).abs() < 0.05 * scale, "d={d}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn plane_cell_masses_sum_to_one() {
        let g = SpaceTimeGrid::new(2, 3.0, 24, 0.1, 2).unwrap();
        let k = free_smoothed(&params(2), &g, 1e-3).unwrap();
        let mass: f64 = k.data.iter().sum::<f64>() * g.cell();
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
        let centre = g.nearest(&[0.0, 0.0]);
        let inside = box_mass(&params(2), &g, 1e-3, centre).unwrap();
        assert!((inside - 1.0).abs() < 1e-3);
    }

    #[test]
    fn transfer_matches_naive_sum() {
        let g = SpaceTimeGrid::new(2, 1.0, 4, 1.0, 1).unwrap();
        let k = Kernel::from_fn(2, 4, |a, b| (a * 3 + b) as f64);
        let phi: Vec<f64> = (0..g.len()).map(|i| (i % 3) as f64).collect();
        let mut out = vec![0.0; g.len()];
        transfer(&g, &phi, &k, &mut out);
        for j in 0..g.len() {
            let [j1, j2] = g.split(j);
            let mut e = 0.0;
            for m in 0..g.len() {
                let [m1, m2] = g.split(m);
                e += phi[m] * ((m1 as i64 - j1 as i64) * 3 + (m2 as i64 - j2 as i64)) as f64;
            }
            assert_eq!(out[j], e);
        }
    }
}
