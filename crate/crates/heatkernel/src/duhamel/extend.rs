//! Chapman–Kolmogorov composition and time extension.
//!
//! Rows p(s, z, ·) for arbitrary z are interpolated from a few anchor rows
//! in displacement form: p(s, z, y) ≈ Σ_a λ_a(z) p(s, z_a, y - z + z_a).
//! The perturbation is localised where b lives, so anchors cluster there;
//! beyond the outer anchors the nearest one is used.

use serde::Serialize;

use super::grid::{SpaceTimeGrid, Source};
use super::kernels::{box_mass, free_point};
use super::series::{sum_series, HeatKernelTable, SeriesDiagnostics, SeriesOptions};
use crate::drift::DriftSpec;
use crate::stable_kernel::StableParams;
use crate::{Error, Result};

/// Anchor nodes on a tensor lattice: axes hold sorted integer coordinates,
/// nodes are listed axis-0-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorSet {
    pub axes: [Vec<usize>; 2],
    pub nodes: Vec<usize>,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sources(&self) -> Vec<Source> {
        self.nodes.iter().map(|&node| Source::Point { node }).collect()
    }

    /// Interpolation weights (anchor index, λ) for the node with the given
    /// integer coordinates.
    fn weights(&self, z: [usize; 2]) -> Vec<(usize, f64)> {
        let per = |axis: &[usize], c: usize| -> Vec<(usize, f64)> {
            if c <= axis[0] {
                return vec![(0, 1.0)];
            }
            let last = axis.len() - 1;
            if c >= axis[last] {
                return vec![(last, 1.0)];
            }
            let i = axis.partition_point(|&a| a <= c) - 1;
            let f = (c - axis[i]) as f64 / (axis[i + 1] - axis[i]) as f64;
            if f == 0.0 {
                vec![(i, 1.0)]
            } else {
                vec![(i, 1.0 - f), (i + 1, f)]
            }
        };
        let w0 = per(&self.axes[0], z[0]);
        let w1 = per(&self.axes[1], z[1]);
        let mut out = Vec::with_capacity(4);
        for &(i, a) in &w0 {
            for &(j, b) in &w1 {
                out.push((i * self.axes[1].len() + j, a * b));
            }
        }
        out
    }
}

/// Default anchors: 9 along the axis in d = 1 at focus + w·{0, ±1/3, ±2/3,
/// ±1, ±2}, a 5 × 5 lattice in d = 2, w the drift support radius (a
/// quarter of the box otherwise).
pub fn anchor_nodes(grid: &SpaceTimeGrid, drift: &DriftSpec) -> AnchorSet {
    let w = drift
        .support_radius()
        .filter(|r| r.is_finite())
        .unwrap_or(0.25 * grid.half_width)
        .min(grid.half_width);
    let snap = |x: f64| (((x + grid.half_width) / grid.h()).round().max(0.0) as usize).min(grid.n);
    let axis = |centre: f64, offsets: &[f64]| -> Vec<usize> {
        let mut v: Vec<usize> = offsets.iter().map(|o| snap(centre + o * w)).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let axes = if grid.d == 1 {
        [
            axis(drift.focus(), &[-2.0, -1.0, -2.0 / 3.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 2.0]),
            vec![0],
        ]
    } else {
        let offsets = [-1.0, -0.5, 0.0, 0.5, 1.0];
        [axis(drift.focus(), &offsets), axis(0.0, &offsets)]
    };
    let per = grid.per_axis();
    let nodes = axes[0]
        .iter()
        .flat_map(|&i| axes[1].iter().map(move |&j| if grid.d == 1 { i } else { i * per + j }))
        .collect();
    AnchorSet { axes, nodes }
}

/// ∫ left(z) p(s, z, ·) dz with p(s, z, ·) interpolated from the anchor
/// rows at slice `slice` of `anchor_table` (anchor i is source i).
pub fn compose(
    params: &StableParams,
    left: &[f64],
    anchors: &AnchorSet,
    anchor_table: &HeatKernelTable,
    slice: usize,
) -> Result<Vec<f64>> {
    let grid = &anchor_table.grid;
    if left.len() != grid.len() {
        return Err(Error::Domain("row length does not match the grid".into()));
    }
    let free = free_point(params, grid, grid.time(slice + 1))?;
    let n = grid.n as i64;
    let per = grid.per_axis() as i64;
    let cell = grid.cell();
    let mut out = vec![0.0; grid.len()];
    for (z, &lz) in left.iter().enumerate() {
        if lz == 0.0 {
            continue;
        }
        let [z1, z2] = grid.split(z);
        for (a, lam) in anchors.weights([z1, z2]) {
            let [a1, a2] = grid.split(anchors.nodes[a]);
            let row = anchor_table.row(a, slice);
            let c = cell * lz * lam;
            let (d1, d2) = (a1 as i64 - z1 as i64, a2 as i64 - z2 as i64);
            for (y, o) in out.iter_mut().enumerate() {
                let [y1, y2] = grid.split(y);
                let (s1, s2) = (y1 as i64 + d1, y2 as i64 + d2);
                let v = if (0..=n).contains(&s1) && (grid.d == 1 || (0..=n).contains(&s2)) {
                    row[if grid.d == 1 { s1 } else { s1 * per + s2 } as usize]
                } else {
                    free.at(y1 as i64 - z1 as i64, y2 as i64 - z2 as i64)
                };
                *o += c * v;
            }
        }
    }
    Ok(out)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()));
    diff / sup(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CkSample {
    pub t: f64,
    pub s: f64,
    pub residual: f64,
}

/// ‖p(t_i + t_j) - p(t_i) ∘ p(t_j)‖_∞ / ‖p(t_i + t_j)‖_∞ for the given
/// 1-based slice pairs of `source` (i + j ≤ steps).
pub fn ck_residual(
    params: &StableParams,
    table: &HeatKernelTable,
    anchors: &AnchorSet,
    source: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<CkSample>> {
    pairs
        .iter()
        .map(|&(i, j)| {
            if i == 0 || j == 0 || i + j > table.grid.steps {
                return Err(Error::Domain(format!("slice pair ({i}, {j}) is outside the table")));
            }
            let composed = compose(params, table.row(source, i - 1), anchors, table, j - 1)?;
            Ok(CkSample {
                t: table.grid.time(i),
                s: table.grid.time(j),
                residual: rel_diff(&composed, table.row(source, i + j - 1)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionReport {
    pub t_star: f64,
    pub t_end: f64,
    pub anchors: usize,
    /// (t, relative gap between the two composition routes) per extended slice
    pub composition_residual: Vec<(f64, f64)>,
    pub max_residual: f64,
}

/// Series on (0, t_*] for `sources` plus anchors, then slices up to
/// `t_end` by p(k t_* + s) = p(k t_*) ∘ p(s). `grid` must end at t_*.
///
/// The recorded residual compares that route with p(t - t_*/2) ∘ p(t_*/2)
/// on every extended slice. More than `max_sources` rows fails with a
/// budget error.
pub fn extend_chapman_kolmogorov(
    params: &StableParams,
    grid: &SpaceTimeGrid,
    drift: &DriftSpec,
    sources: &[Source],
    options: &SeriesOptions,
    t_end: f64,
    max_sources: usize,
) -> Result<(HeatKernelTable, SeriesDiagnostics, ExtensionReport)> {
    let anchors = anchor_nodes(grid, drift);
    let requested = sources.len() + anchors.len();
    if requested > max_sources {
        return Err(Error::MemoryBudget {
            requested,
            cap: max_sources,
        });
    }
    let m = grid.steps;
    if m < 2 {
        return Err(Error::Domain("extension needs at least two slices up to t_*".into()));
    }
    let total = (t_end / grid.tau).round() as usize;
    if total < m {
        return Err(Error::Domain("t_end lies below the series window".into()));
    }
    let mut all = anchors.sources();
    all.extend_from_slice(sources);
    let (base, diagnostics) = sum_series(params, grid, drift, &all, options)?;
    let offset = anchors.len();
    let long = grid.with_times(grid.time(total), total)?;
    let half = m / 2;
    let mut values = Vec::with_capacity(sources.len());
    let mut leaked = Vec::with_capacity(sources.len());
    let mut residual = vec![0.0f64; total - m];
    for (s, src) in sources.iter().enumerate() {
        let mut rows: Vec<Vec<f64>> = base.values[offset + s].clone();
        let mut leak = base.leaked[offset + s].clone();
        for j in m + 1..=total {
            let k = (j - 1) / m;
            let i = j - k * m;
            let a = compose(params, &rows[k * m - 1], &anchors, &base, i - 1)?;
            let b = compose(params, &rows[j - half - 1], &anchors, &base, half - 1)?;
            residual[j - m - 1] = residual[j - m - 1].max(rel_diff(&b, &a));
            rows.push(a);
            leak.push(match src {
                Source::Point { node } => 1.0 - box_mass(params, &long, long.time(j), *node)?,
                Source::Density { .. } => 0.0,
            });
        }
        values.push(rows);
        leaked.push(leak);
    }
    let raw_min = (0..total)
        .map(|j| {
            values
                .iter()
                .flat_map(|src: &Vec<Vec<f64>>| src[j].iter().copied())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let term_norms = (0..sources.len())
        .map(|s| {
            let mut v = base.term_norms[offset + s].clone();
            v.resize(total, Vec::new());
            v
        })
        .collect();
    let composition_residual: Vec<(f64, f64)> = residual
        .iter()
        .enumerate()
        .map(|(i, r)| (long.time(m + 1 + i), *r))
        .collect();
    let report = ExtensionReport {
        t_star: grid.t_max(),
        t_end: long.t_max(),
        anchors: anchors.len(),
        max_residual: residual.iter().copied().fold(0.0, f64::max),
        composition_residual,
    };
    let table = HeatKernelTable {
        grid: long,
        params: *params,
        sources: sources.to_vec(),
        values,
        leaked,
        term_norms,
        raw_min,
    };
    Ok((table, diagnostics, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable_kernel::eval_density;

    fn params() -> StableParams {
        StableParams::new(1, 1.5, 1.0, 2.0).unwrap()
    }

    #[test]
    fn free_composition_matches_the_free_kernel() {
        let p = params();
        let g = SpaceTimeGrid::new(1, 8.0, 128, 0.25, 4).unwrap();
        let src = [Source::point(&g, &[0.0]).unwrap()];
        let (tab, _, rep) =
            extend_chapman_kolmogorov(&p, &g, &DriftSpec::zero(1), &src, &SeriesOptions::default(), 0.5, 16).unwrap();
        assert_eq!(tab.grid.steps, 8);
        let centre = src[0].node().unwrap();
        let exact = eval_density(&p, 0.5, &[0.0]).unwrap();
        assert!((tab.row(0, 7)[centre] / exact - 1.0).abs() < 1e-3);
        assert!(rep.max_residual < 1e-3);
        // mass only leaks through the box edge
        assert!((tab.mass(0, 7) - 1.0).abs() < 2e-3);
    }

    #[test]
    fn anchors_bracket_the_bump() {
        let g = SpaceTimeGrid::new(1, 8.0, 128, 0.1, 4).unwrap();
        let a = anchor_nodes(&g, &DriftSpec::bump(1, 1.0, 0.5, 1.0).unwrap());
        assert_eq!(a.len(), 9);
        assert_eq!(g.point(a.nodes[4]), vec![0.5]);
        let g2 = SpaceTimeGrid::new(2, 3.0, 12, 0.1, 2).unwrap();
        assert_eq!(anchor_nodes(&g2, &DriftSpec::bump(2, 1.0, 0.0, 1.0).unwrap()).len(), 25);
    }

    #[test]
    fn source_cap_is_enforced() {
        let g = SpaceTimeGrid::new(1, 8.0, 64, 0.1, 4).unwrap();
        let src = [Source::point(&g, &[0.0]).unwrap()];
        let err = extend_chapman_kolmogorov(
            &params(),
            &g,
            &DriftSpec::bump(1, 1.0, 0.0, 1.0).unwrap(),
            &src,
            &SeriesOptions::default(),
            0.2,
            4,
        )
        .unwrap_err();
        assert_eq!(err, Error::MemoryBudget { requested: 10, cap: 4 });
    }

    #[test]
    fn semigroup_holds_within_the_window() {
        let p = params();
        let g = SpaceTimeGrid::new(1, 8.0, 128, 0.0625, 8).unwrap();
        let drift = DriftSpec::bump(1, 2.0, 0.0, 1.0).unwrap();
        let anchors = anchor_nodes(&g, &drift);
        let mut all = anchors.sources();
        all.push(Source::point(&g, &[0.3]).unwrap());
        let (tab, _) = sum_series(&p, &g, &drift, &all, &SeriesOptions::default()).unwrap();
        let ck = ck_residual(&p, &tab, &anchors, anchors.len(), &[(2, 2), (3, 5), (4, 4), (6, 2)]).unwrap();
        for c in ck {
            assert!(c.residual < 1e-2, "{c:?}");
        }
    }
}
