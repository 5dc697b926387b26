//! Picard recursion p_k(t, x, y) = ∫_0^t ∫ p_{k-1}(t-s, x, z) b(z)·∇_z p^a(s, z, y) dz ds
//! on a uniform time grid, and the summed series.
//!
//! Time integrals use product integration: the earlier layer is linear
//! between grid times and the drift kernel is integrated exactly against
//! each hat (Gauss–Legendre, with s = τv² on the first interval). The free
//! layer of a point source is a delta at s = t, so for k = 1 the last
//! interval swaps roles: the drift kernel is interpolated and the free
//! density is integrated in time, and the first slice is done directly.

use rayon::prelude::*;
use serde::Serialize;

use super::grid::{SpaceTimeGrid, Source};
use super::kernels::{box_mass, drift_kernel, free_point, free_rep, shifted, transfer, Kernel};
use crate::drift::DriftSpec;
use crate::envelopes::LatticePoint;
use crate::quad::GaussLegendre;
use crate::stable_kernel::{dist, StableParams};
use crate::{Error, Result};

const FIRST_NODES: usize = 8;
const INTERVAL_NODES: usize = 4;
const DIRECT_NODES: usize = 12;

/// One term p_k for every source: values[source][slice][node], where slice
/// j - 1 holds t_j.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub k: usize,
    pub values: Vec<Vec<Vec<f64>>>,
}

impl Layer {
    /// ‖p_k(t_j)‖_∞ per [source][slice].
    pub fn norms(&self) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .map(|src| src.iter().map(|row| row.iter().fold(0.0, |m, v| f64::max(m, v.abs()))).collect())
            .collect()
    }
}

/// Kernel values on a space-time grid with per-slice diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatKernelTable {
    pub grid: SpaceTimeGrid,
    pub params: StableParams,
    pub sources: Vec<Source>,
    /// values[source][slice][node]
    pub values: Vec<Vec<Vec<f64>>>,
    /// free-kernel mass outside the box, [source][slice]
    pub leaked: Vec<Vec<f64>>,
    /// ‖p_k‖_∞ as [source][slice][k]
    pub term_norms: Vec<Vec<Vec<f64>>>,
    /// smallest raw value per slice before clamping
    pub raw_min: Vec<f64>,
}

impl HeatKernelTable {
    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn row(&self, source: usize, slice: usize) -> &[f64] {
        &self.values[source][slice]
    }

    /// h^d Σ p + leaked mass.
    pub fn mass(&self, source: usize, slice: usize) -> f64 {
        self.grid.cell() * self.values[source][slice].iter().sum::<f64>() + self.leaked[source][slice]
    }

    pub fn mass_defect(&self, source: usize, slice: usize) -> f64 {
        self.mass(source, slice) - self.sources[source].mass(&self.grid)
    }

    /// Largest |mass defect| per slice over sources.
    pub fn mass_defects(&self) -> Vec<f64> {
        (0..self.grid.steps)
            .map(|j| {
                (0..self.sources.len())
                    .map(|s| self.mass_defect(s, j).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Slice index holding time t, if t is on the grid.
    pub fn slice_of(&self, t: f64) -> Option<usize> {
        let j = (t / self.grid.tau).round();
        if j >= 1.0 && j <= self.grid.steps as f64 && (j * self.grid.tau - t).abs() <= 1e-9 * t.max(self.grid.tau) {
            Some(j as usize - 1)
        } else {
            None
        }
    }

    /// (t, |y - x₀|, p) for a point source over nodes with |y - x₀| ≤ max_r.
    pub fn lattice(&self, source: usize, max_r: f64) -> Result<Vec<LatticePoint>> {
        let node = self.sources[source]
            .node()
            .ok_or_else(|| Error::Domain("lattices need a point source".into()))?;
        let x0 = self.grid.point(node);
        let radii: Vec<f64> = (0..self.grid.len()).map(|i| dist(&self.grid.point(i), &x0)).collect();
        let mut out = Vec::new();
        for (j, row) in self.values[source].iter().enumerate() {
            let t = self.grid.time(j + 1);
            for (r, v) in radii.iter().zip(row) {
                if *r <= max_r {
                    out.push(LatticePoint { t, r: *r, value: *v });
                }
            }
        }
        Ok(out)
    }

    pub fn min_value(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Drift e₁-component at every node; a singular node takes the value half
/// a cell away.
pub(crate) fn drift_at_nodes(grid: &SpaceTimeGrid, drift: &DriftSpec) -> Vec<f64> {
    let h = grid.h();
    (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let v = drift.first_component(&x);
            if v.is_finite() {
                v
            } else {
                let mut y = x.clone();
                y[0] += 0.5 * h;
                drift.first_component(&y)
            }
        })
        .collect()
}

fn leaked_for(params: &StableParams, grid: &SpaceTimeGrid, source: &Source, t: f64) -> Result<f64> {
    match source {
        Source::Point { node } => Ok(1.0 - box_mass(params, grid, t, *node)?),
        Source::Density { values } => {
            let cell = grid.cell();
            let mut acc = 0.0;
            for (m, g) in values.iter().enumerate() {
                if *g != 0.0 {
                    acc += cell * g * (1.0 - box_mass(params, grid, t, m)?);
                }
            }
            Ok(acc)
        }
    }
}

/// Row y ↦ ∫ μ(dx) K(y - x) for the source μ.
fn source_row(grid: &SpaceTimeGrid, source: &Source, k: &Kernel) -> Vec<f64> {
    match source {
        Source::Point { node } => shifted(grid, k, *node),
        Source::Density { values } => {
            let w: Vec<f64> = values.iter().map(|g| g * grid.cell()).collect();
            let mut out = vec![0.0; grid.len()];
            transfer(grid, &w, k, &mut out);
            out
        }
    }
}

/// The k = 0 layer, p^a(t_j, y - x₀), with mass diagnostics.
pub fn build_table_p0(params: &StableParams, grid: &SpaceTimeGrid, sources: &[Source]) -> Result<HeatKernelTable> {
    if params.d != grid.d {
        return Err(Error::Domain("kernel and grid dimensions differ".into()));
    }
    if sources.is_empty() {
        return Err(Error::Domain("at least one source is required".into()));
    }
    for s in sources {
        if let Source::Density { values } = s {
            if values.len() != grid.len() {
                return Err(Error::Domain("source density does not match the grid".into()));
            }
        }
    }
    let times = grid.times();
    let kernels: Vec<Kernel> = times
        .par_iter()
        .map(|&t| free_point(params, grid, t))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(sources.len());
    let mut leaked = Vec::with_capacity(sources.len());
    for s in sources {
        values.push(kernels.iter().map(|k| source_row(grid, s, k)).collect::<Vec<_>>());
        leaked.push(
            times
                .iter()
                .map(|&t| leaked_for(params, grid, s, t))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let term_norms = Layer { k: 0, values: values.clone() }
        .norms()
        .into_iter()
        .map(|src| src.into_iter().map(|v| vec![v]).collect())
        .collect();
    let raw_min = (0..grid.steps)
        .map(|j| {
            values
                .iter()
                .flat_map(|src: &Vec<Vec<f64>>| src[j].iter().copied())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(HeatKernelTable {
        grid: *grid,
        params: *params,
        sources: sources.to_vec(),
        values,
        leaked,
        term_norms,
        raw_min,
    })
}

/// Precomputed time-integrated kernels for one (params, grid, drift).
#[derive(Debug, Clone)]
pub struct PicardEngine {
    pub params: StableParams,
    pub grid: SpaceTimeGrid,
    drift: Vec<f64>,
    /// ∫ over [iτ, (i+1)τ] of the falling half-hat times A_s, i = 0..steps-1
    right: Vec<Kernel>,
    /// ∫ over [(i-1)τ, iτ] of the rising half-hat times A_s, at index i
    left: Vec<Kernel>,
    /// left[i] + right[i]
    full: Vec<Kernel>,
    /// A_{t_j} at index j
    at_grid: Vec<Kernel>,
    /// free density in propagation form at t_j, index j
    rep0: Vec<Kernel>,
    /// ∫_0^τ (1 - u/τ) p(u) du and ∫_0^τ (u/τ) p(u) du in propagation form
    ra: Kernel,
    rb: Kernel,
}

impl PicardEngine {
    pub fn new(params: &StableParams, grid: &SpaceTimeGrid, drift: &DriftSpec) -> Result<Self> {
        if params.d != grid.d || drift.d != grid.d {
            return Err(Error::Domain("kernel, drift and grid dimensions differ".into()));
        }
        let tau = grid.tau;
        let steps = grid.steps;
        let gl_first = GaussLegendre::new(FIRST_NODES);
        let gl = GaussLegendre::new(INTERVAL_NODES);
        let pieces: Vec<(Kernel, Kernel)> = (0..steps)
            .into_par_iter()
            .map(|e| -> Result<(Kernel, Kernel)> {
                let mut r = Kernel::zeros(grid.d, grid.n);
                let mut l = Kernel::zeros(grid.d, grid.n);
                let nodes: Vec<(f64, f64)> = if e == 0 {
                    gl_first.mapped(0.0, 1.0).map(|(v, w)| (tau * v * v, 2.0 * tau * v * w)).collect()
                } else {
                    gl.mapped(e as f64 * tau, (e + 1) as f64 * tau).collect()
                };
                for (s, w) in nodes {
                    let a = drift_kernel(params, grid, s)?;
                    let th = s / tau - e as f64;
                    r.axpy(w * (1.0 - th), &a);
                    l.axpy(w * th, &a);
                }
                Ok((r, l))
            })
            .collect::<Result<_>>()?;
        let mut right = Vec::with_capacity(steps);
        let mut left = vec![Kernel::zeros(grid.d, grid.n)];
        for (r, l) in pieces {
            right.push(r);
            left.push(l);
        }
        let full = (0..=steps)
            .map(|i| {
                let mut k = left[i].clone();
                if i < steps {
                    k.axpy(1.0, &right[i]);
                }
                k
            })
            .collect();
        let mut at_grid = vec![Kernel::zeros(grid.d, grid.n)];
        at_grid.extend(
            (1..=steps)
                .into_par_iter()
                .map(|j| drift_kernel(params, grid, grid.time(j)))
                .collect::<Result<Vec<_>>>()?,
        );
        let mut rep0 = vec![Kernel::zeros(grid.d, grid.n)];
        rep0.extend(
            (1..=steps)
                .into_par_iter()
                .map(|j| free_rep(params, grid, grid.time(j)))
                .collect::<Result<Vec<_>>>()?,
        );
        let mut ra = Kernel::zeros(grid.d, grid.n);
        let mut rb = Kernel::zeros(grid.d, grid.n);
        for (v, w) in GaussLegendre::new(DIRECT_NODES).mapped(0.0, 1.0) {
            let u = tau * v * v;
            let k = free_rep(params, grid, u)?;
            let wt = 2.0 * tau * v * w;
            ra.axpy(wt * (1.0 - v * v), &k);
            rb.axpy(wt * v * v, &k);
        }
        Ok(Self {
            params: *params,
            grid: *grid,
            drift: drift_at_nodes(grid, drift),
            right,
            left,
            full,
            at_grid,
            rep0,
            ra,
            rb,
        })
    }

    pub fn drift_nodes(&self) -> &[f64] {
        &self.drift
    }

    fn times_b(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.drift).map(|(a, b)| a * b).collect()
    }

    /// Free layer of a source in propagation form at t_j.
    fn free_row(&self, source: &Source, j: usize) -> Vec<f64> {
        source_row(&self.grid, source, &self.rep0[j])
    }

    /// ∫_0^t p^a(t-s) ⋆ (b ∂p^a(s)) ds for a point source by split
    /// Gauss–Legendre with s = (t/2)v² and t - s = (t/2)v².
    pub(crate) fn direct_first(&self, node: usize, t: f64) -> Result<Vec<f64>> {
        direct_first_layer(&self.params, &self.grid, &self.drift, node, t)
    }

    /// Layer k from layer k - 1 (`prev` = None means the free layer).
    pub(crate) fn step_source(&self, source: &Source, prev: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        let steps = self.grid.steps;
        let len = self.grid.len();
        // φ at t_j, index j (index 0 = t = 0)
        let mut phi: Vec<Option<Vec<f64>>> = vec![None; steps + 1];
        for (j, p) in phi.iter_mut().enumerate().skip(1) {
            let row = match prev {
                Some(rows) => rows[j - 1].clone(),
                None => self.free_row(source, j),
            };
            *p = Some(self.times_b(&row));
        }
        if prev.is_none() {
            if let Source::Density { values } = source {
                phi[0] = Some(self.times_b(values));
            }
        }
        let point_first = prev.is_none() && matches!(source, Source::Point { .. });
        let (ra_row, rb_row) = if point_first {
            (
                Some(self.times_b(&source_row(&self.grid, source, &self.ra))),
                Some(self.times_b(&source_row(&self.grid, source, &self.rb))),
            )
        } else {
            (None, None)
        };
        (1..=steps)
            .into_par_iter()
            .map(|j| -> Result<Vec<f64>> {
                if point_first && j == 1 {
                    return self.direct_first(source.node().unwrap(), self.grid.time(1));
                }
                let mut out = vec![0.0; len];
                if point_first {
                    for i in 0..=j - 2 {
                        let k = if i == 0 { &self.right[0] } else { &self.full[i] };
                        transfer(&self.grid, phi[j - i].as_ref().unwrap(), k, &mut out);
                    }
                    transfer(&self.grid, phi[1].as_ref().unwrap(), &self.left[j - 1], &mut out);
                    transfer(&self.grid, rb_row.as_ref().unwrap(), &self.at_grid[j - 1], &mut out);
                    transfer(&self.grid, ra_row.as_ref().unwrap(), &self.at_grid[j], &mut out);
                } else {
                    for i in 0..j {
                        let k = if i == 0 { &self.right[0] } else { &self.full[i] };
                        transfer(&self.grid, phi[j - i].as_ref().unwrap(), k, &mut out);
                    }
                    if let Some(p0) = &phi[0] {
                        transfer(&self.grid, p0, &self.left[j], &mut out);
                    }
                }
                Ok(out)
            })
            .collect()
    }
}

/// First Picard term at a single time t for a point source.
pub(crate) fn direct_first_layer(
    params: &StableParams,
    grid: &SpaceTimeGrid,
    drift: &[f64],
    node: usize,
    t: f64,
) -> Result<Vec<f64>> {
    let half = 0.5 * t;
    let mut out = vec![0.0; grid.len()];
    for (v, w) in GaussLegendre::new(DIRECT_NODES).mapped(0.0, 1.0) {
        let small = half * v * v;
        let wt = 2.0 * half * v * w;
        for (u, s) in [(t - small, small), (small, t - small)] {
            let row = shifted(grid, &free_rep(params, grid, u)?, node);
            let phi: Vec<f64> = row.iter().zip(drift).map(|(a, b)| a * b).collect();
            let k = drift_kernel(params, grid, s)?.scaled(wt);
            transfer(grid, &phi, &k, &mut out);
        }
    }
    Ok(out)
}

/// p_k from p_{k-1} on every slice and source. `prev` is the previous
/// layer, or the free table when k = 1.
pub fn picard_step(engine: &PicardEngine, sources: &[Source], prev: &Layer) -> Result<Layer> {
    let k = prev.k + 1;
    let values = sources
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if k == 1 {
                engine.step_source(s, None)
            } else {
                engine.step_source(s, Some(&prev.values[i]))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Layer { k, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesOptions {
    /// stop once ‖p_k‖ ≤ tolerance ‖p_0‖ on every slice
    pub tolerance: f64,
    pub max_terms: usize,
    /// abort when ‖p_k‖ > contraction ‖p_{k-1}‖ on a slice
    pub contraction: f64,
    /// negative values above -noise_floor are clamped to 0
    pub noise_floor: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_terms: 40,
            contraction: 0.5,
            noise_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesDiagnostics {
    /// ‖p_k‖_∞ per [slice][k], largest over sources
    pub term_norms: Vec<Vec<f64>>,
    /// index of the first negligible term (1 when b ≡ 0)
    pub truncation_k: usize,
    /// (√t_j, ‖p_1‖/‖p_0‖)
    pub ratio_curve: Vec<(f64, f64)>,
    /// largest ‖p_{k+1}‖/‖p_k‖ over slices and terms above the tolerance
    pub max_ratio: f64,
    pub raw_min: f64,
    pub mass_defect: Vec<f64>,
}

/// Σ_k p_k on the grid.
pub fn sum_series(
    params: &StableParams,
    grid: &SpaceTimeGrid,
    drift: &DriftSpec,
    sources: &[Source],
    options: &SeriesOptions,
) -> Result<(HeatKernelTable, SeriesDiagnostics)> {
    let mut table = build_table_p0(params, grid, sources)?;
    let steps = grid.steps;
    let base: Vec<Vec<f64>> = Layer {
        k: 0,
        values: table.values.clone(),
    }
    .norms();
    let mut sum = table.values.clone();
    let mut truncation_k = options.max_terms;
    if drift.is_zero() {
        truncation_k = 1;
    } else {
        let engine = PicardEngine::new(params, grid, drift)?;
        let mut prev = Layer {
            k: 0,
            values: table.values.clone(),
        };
        let mut prev_norms = base.clone();
        for k in 1..=options.max_terms {
            let layer = picard_step(&engine, sources, &prev)?;
            let norms = layer.norms();
            for j in 0..steps {
                for s in 0..sources.len() {
                    let (nk, np) = (norms[s][j], prev_norms[s][j]);
                    if nk > options.tolerance * base[s][j] && nk > options.contraction * np {
                        return Err(Error::ConvergenceAbort {
                            t: grid.time(j + 1),
                            k,
                            norm: nk,
                            prev: np,
                        });
                    }
                }
            }
            for (s, src) in layer.values.iter().enumerate() {
                for (j, row) in src.iter().enumerate() {
                    for (a, b) in sum[s][j].iter_mut().zip(row) {
                        *a += b;
                    }
                    table.term_norms[s][j].push(norms[s][j]);
                }
            }
            let done = (0..sources.len()).all(|s| (0..steps).all(|j| norms[s][j] <= options.tolerance * base[s][j]));
            prev_norms = norms;
            prev = layer;
            if done {
                truncation_k = k;
                break;
            }
        }
    }
    let mut raw_min = vec![f64::INFINITY; steps];
    for src in sum.iter_mut() {
        for (j, row) in src.iter_mut().enumerate() {
            for v in row.iter_mut() {
                raw_min[j] = raw_min[j].min(*v);
                if *v < 0.0 && *v >= -options.noise_floor {
                    *v = 0.0;
                }
            }
        }
    }
    table.values = sum;
    table.raw_min = raw_min.clone();
    let term_norms: Vec<Vec<f64>> = (0..steps)
        .map(|j| {
            let terms = table.term_norms[0][j].len();
            (0..terms)
                .map(|k| {
                    table
                        .term_norms
                        .iter()
                        .map(|src| src[j][k])
                        .fold(0.0, f64::max)
                })
                .collect()
        })
        .collect();
    let ratio_curve = term_norms
        .iter()
        .enumerate()
        .map(|(j, n)| (grid.time(j + 1).sqrt(), n.get(1).copied().unwrap_or(0.0) / n[0]))
        .collect();
    let mut max_ratio: f64 = 0.0;
    for src in &table.term_norms {
        for (j, n) in src.iter().enumerate() {
            for k in 1..n.len() {
                if n[k] > options.tolerance * n[0] {
                    max_ratio = max_ratio.max(n[k] / n[k - 1]);
                }
            }
            let _ = j;
        }
    }
    let diagnostics = SeriesDiagnostics {
        term_norms,
        truncation_k,
        ratio_curve,
        max_ratio,
        raw_min: raw_min.iter().copied().fold(f64::INFINITY, f64::min),
        mass_defect: table.mass_defects(),
    };
    Ok((table, diagnostics))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TStarEstimate {
    pub t_star: f64,
    /// (t, ‖p_1‖/‖p_0‖) for each dyadic probe, largest t first
    pub probes: Vec<(f64, f64)>,
    /// false when even the smallest probe failed the threshold
    pub converged: bool,
}

pub const TSTAR_RATIO: f64 = 0.25;
const TSTAR_LEVELS: usize = 16;

/// Largest dyadic t ≤ 1 with ‖p_1(t)‖_∞ ≤ ¼ ‖p_0(t)‖_∞ for every source.
pub fn estimate_tstar(
    params: &StableParams,
    drift: &DriftSpec,
    grid: &SpaceTimeGrid,
    sources: &[Source],
) -> Result<TStarEstimate> {
    if drift.is_zero() {
        return Ok(TStarEstimate {
            t_star: 1.0,
            probes: vec![(1.0, 0.0)],
            converged: true,
        });
    }
    let nodes: Vec<usize> = sources.iter().filter_map(Source::node).collect();
    if nodes.is_empty() {
        return Err(Error::Domain("t_* probes need a point source".into()));
    }
    let b = drift_at_nodes(grid, drift);
    let mut probes = Vec::new();
    let mut t = 1.0;
    for _ in 0..TSTAR_LEVELS {
        let p0 = free_point(params, grid, t)?;
        let mut ratio: f64 = 0.0;
        for &node in &nodes {
            let row0 = shifted(grid, &p0, node);
            let row1 = direct_first_layer(params, grid, &b, node, t)?;
            let n0 = row0.iter().fold(0.0, |m, v| f64::max(m, v.abs()));
            let n1 = row1.iter().fold(0.0, |m, v| f64::max(m, v.abs()));
            ratio = ratio.max(n1 / n0);
        }
        probes.push((t, ratio));
        if ratio <= TSTAR_RATIO {
            return Ok(TStarEstimate {
                t_star: t,
                probes,
                converged: true,
            });
        }
        t *= 0.5;
    }
    Ok(TStarEstimate {
        t_star: 2.0 * t,
        probes,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable_kernel::eval_density;

    fn params() -> StableParams {
        StableParams::new(1, 1.5, 1.0, 2.0).unwrap()
    }

    #[test]
    fn zero_drift_is_the_free_table() {
        let g = SpaceTimeGrid::new(1, 6.0, 64, 0.2, 4).unwrap();
        let src = [Source::point(&g, &[0.0]).unwrap()];
        let (tab, diag) = sum_series(&params(), &g, &DriftSpec::zero(1), &src, &SeriesOptions::default()).unwrap();
        let free = build_table_p0(&params(), &g, &src).unwrap();
        assert_eq!(diag.truncation_k, 1);
        assert_eq!(tab.values, free.values);
    }

    #[test]
    fn constant_drift_translates_the_free_kernel() {
        let g = SpaceTimeGrid::new(1, 6.0, 96, 0.25, 8).unwrap();
        let src = [Source::point(&g, &[0.0]).unwrap()];
        let c = 0.5;
        let (tab, diag) = sum_series(&params(), &g, &DriftSpec::constant(1, c), &src, &SeriesOptions::default()).unwrap();
        assert!(diag.max_ratio < 0.25);
        let t = g.time(8);
        let row = tab.row(0, 7);
        let mut err: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for (i, x) in g.points().iter().enumerate() {
            if x[0].abs() > 4.0 {
                continue;
            }
            let exact = eval_density(&params(), t, &[x[0] - c * t]).unwrap();
            err = err.max((row[i] - exact).abs());
            peak = peak.max(exact);
        }
        assert!(err < 1e-3 * peak, "relative error {}", err / peak);
    }

    #[test]
    fn mass_is_conserved_and_rows_are_positive() {
        let g = SpaceTimeGrid::new(1, 8.0, 128, 0.0625, 8).unwrap();
        let drift = DriftSpec::bump(1, 2.0, 0.0, 1.0).unwrap();
        let src = [Source::point(&g, &[0.25]).unwrap()];
        let (tab, diag) = sum_series(&params(), &g, &drift, &src, &SeriesOptions::default()).unwrap();
        assert!(diag.mass_defect.iter().all(|m| *m < 1e-3), "{:?}", diag.mass_defect);
        assert!(diag.raw_min > -1e-6);
        assert!(tab.min_value() >= 0.0);
        // the bump pushes mass to the right
        let mean: f64 = g.points().iter().zip(tab.row(0, 7)).map(|(x, p)| x[0] * p * g.h()).sum();
        assert!(mean > 0.25);
    }

    #[test]
    fn large_times_abort() {
        let g = SpaceTimeGrid::new(1, 8.0, 64, 2.0, 4).unwrap();
        let drift = DriftSpec::bump(1, 8.0, 0.0, 1.0).unwrap();
        let src = [Source::point(&g, &[0.0]).unwrap()];
        let err = sum_series(&params(), &g, &drift, &src, &SeriesOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ConvergenceAbort { .. }), "{err}");
    }

    #[test]
    fn tstar_shrinks_with_stronger_drift() {
        let g = SpaceTimeGrid::new(1, 8.0, 64, 1.0, 1).unwrap();
        let src = [Source::point(&g, &[0.0]).unwrap()];
        let weak = estimate_tstar(&params(), &DriftSpec::bump(1, 1.0, 0.0, 1.0).unwrap(), &g, &src).unwrap();
        let strong = estimate_tstar(&params(), &DriftSpec::bump(1, 4.0, 0.0, 1.0).unwrap(), &g, &src).unwrap();
        assert!(strong.t_star < weak.t_star);
        assert!(strong.probes.last().unwrap().1 <= TSTAR_RATIO);
    }

    #[test]
    fn density_source_rows_carry_its_mass() {
        let g = SpaceTimeGrid::new(1, 8.0, 128, 0.05, 4).unwrap();
        let src = [Source::density(&g, |x| (-(x[0] * x[0]) * 4.0).exp())];
        let drift = DriftSpec::bump(1, 1.0, 0.0, 1.0).unwrap();
        let (tab, _) = sum_series(&params(), &g, &drift, &src, &SeriesOptions::default()).unwrap();
        for j in 0..4 {
            assert!(tab.mass_defect(0, j).abs() < 1e-4);
        }
    }

    #[test]
    fn plane_constant_drift_translates() {
        let p = StableParams::new(2, 1.5, 1.0, 2.0).unwrap();
        let g = SpaceTimeGrid::new(2, 3.0, 24, 0.1, 4).unwrap();
        let src = [Source::point(&g, &[0.0, 0.0]).unwrap()];
        let (tab, _) = sum_series(&p, &g, &DriftSpec::constant(2, 0.5), &src, &SeriesOptions::default()).unwrap();
        let t = g.t_max();
        let mut err: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for (i, x) in g.points().iter().enumerate() {
            if x[0].abs() > 2.0 || x[1].abs() > 2.0 {
                continue;
            }
            let exact = eval_density(&p, t, &[x[0] - 0.5 * t, x[1]]).unwrap();
            err = err.max((tab.row(0, 3)[i] - exact).abs());
            peak = peak.max(exact);
        }
        assert!(err < 2e-3 * peak, "relative error {}", err / peak);
    }
}
