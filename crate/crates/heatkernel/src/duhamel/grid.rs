//! Space-time grid and kernel sources.

use serde::Serialize;

use super::kernels::box_mass;
use crate::stable_kernel::StableParams;
use crate::{Error, Result};

/// Uniform spatial grid [-L, L]^d with n intervals per axis (n + 1 nodes),
/// and uniform times t_j = j τ for j = 1..=steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceTimeGrid {
    pub d: usize,
    pub half_width: f64,
    pub n: usize,
    pub tau: f64,
    pub steps: usize,
}

impl SpaceTimeGrid {
    pub fn new(d: usize, half_width: f64, n: usize, t_max: f64, steps: usize) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::Unsupported("Duhamel grids support d = 1 and d = 2".into()));
        }
        if !(half_width > 0.0) {
            return Err(Error::Domain("box half-width must be positive".into()));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::Domain("n must be even and at least 4".into()));
        }
        if !(t_max > 0.0) || steps == 0 {
            return Err(Error::Domain("need t_max > 0 and at least one time step".into()));
        }
        Ok(Self {
            d,
            half_width,
            n,
            tau: t_max / steps as f64,
            steps,
        })
    }

    /// Same box, new time axis.
    pub fn with_times(&self, t_max: f64, steps: usize) -> Result<Self> {
        Self::new(self.d, self.half_width, self.n, t_max, steps)
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Volume element h^d.
    pub fn cell(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn per_axis(&self) -> usize {
        self.n + 1
    }

    pub fn len(&self) -> usize {
        self.per_axis().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_max(&self) -> f64 {
        self.tau * self.steps as f64
    }

    /// t_j for j = 1..=steps (index j-1).
    pub fn times(&self) -> Vec<f64> {
        (1..=self.steps).map(|j| self.time(j)).collect()
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.tau
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    /// Integer coordinates of a node.
    pub fn split(&self, idx: usize) -> [usize; 2] {
        if self.d == 1 {
            [idx, 0]
        } else {
            [idx / self.per_axis(), idx % self.per_axis()]
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let [i, j] = self.split(idx);
        if self.d == 1 {
            vec![self.coord(i)]
        } else {
            vec![self.coord(i), self.coord(j)]
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Nearest node to x (clamped to the box).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let axis = |v: f64| (((v + self.half_width) / self.h()).round().max(0.0) as usize).min(self.n);
        if self.d == 1 {
            axis(x[0])
        } else {
            axis(x[0]) * self.per_axis() + axis(x[1])
        }
    }

    /// Distance from node `idx` to the box boundary.
    pub fn depth(&self, idx: usize) -> f64 {
        self.point(idx)
            .iter()
            .map(|v| self.half_width - v.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Free-kernel mass leaving the box by time t_max from the centre.
    pub fn leaked_mass(&self, params: &StableParams) -> Result<f64> {
        let centre = self.nearest(&vec![0.0; self.d]);
        Ok(1.0 - box_mass(params, self, self.t_max(), centre)?)
    }

    /// Fails when more than `budget` of the free kernel's mass leaves the
    /// box by the last time slice.
    pub fn check_tail(&self, params: &StableParams, budget: f64) -> Result<f64> {
        let leak = self.leaked_mass(params)?;
        if leak > budget {
            return Err(Error::GridTooSmall(format!(
                "free-kernel mass {leak:.3e} leaves [-{L}, {L}]^{d} by t = {t}, above the budget {budget:e}",
                L = self.half_width,
                d = self.d,
                t = self.t_max()
            )));
        }
        Ok(leak)
    }
}

/// Initial condition of a kernel row: a unit mass at a node, or a density
/// sampled on the grid (rows then hold ∫ g(x) p(t, x, ·) dx).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Source {
    Point { node: usize },
    Density { values: Vec<f64> },
}

impl Source {
    pub fn point(grid: &SpaceTimeGrid, x: &[f64]) -> Result<Self> {
        if x.len() != grid.d {
            return Err(Error::Domain("source dimension does not match the grid".into()));
        }
        Ok(Source::Point { node: grid.nearest(x) })
    }

    pub fn density(grid: &SpaceTimeGrid, g: impl Fn(&[f64]) -> f64) -> Self {
        Source::Density {
            values: grid.points().iter().map(|p| g(p)).collect(),
        }
    }

    /// Node of a point source.
    pub fn node(&self) -> Option<usize> {
        match self {
            Source::Point { node } => Some(*node),
            Source::Density { .. } => None,
        }
    }

    /// Total mass h^d Σ g, or 1 for a point source.
    pub fn mass(&self, grid: &SpaceTimeGrid) -> f64 {
        match self {
            Source::Point { .. } => 1.0,
            Source::Density { values } => grid.cell() * values.iter().sum::<f64>(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_layout() {
        let g = SpaceTimeGrid::new(1, 8.0, 128, 0.5, 64).unwrap();
        assert_eq!(g.h(), 0.125);
        assert_eq!(g.len(), 129);
        assert_eq!(g.point(64), vec![0.0]);
        assert_eq!(g.nearest(&[0.06]), 64);
        assert_eq!(g.times().len(), 64);
        assert!((g.t_max() - 0.5).abs() < 1e-15);
        let g2 = SpaceTimeGrid::new(2, 3.0, 12, 0.1, 4).unwrap();
        assert_eq!(g2.point(g2.nearest(&[0.5, -1.0])), vec![0.5, -1.0]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SpaceTimeGrid::new(3, 1.0, 8, 1.0, 4).is_err());
        assert!(SpaceTimeGrid::new(1, 1.0, 7, 1.0, 4).is_err());
        assert!(SpaceTimeGrid::new(1, 1.0, 8, 0.0, 4).is_err());
    }

    #[test]
    fn tail_budget() {
        let p = StableParams::new(1, 1.0, 1.0, 1.0).unwrap();
        let small = SpaceTimeGrid::new(1, 1.0, 16, 1.0, 4).unwrap();
        assert!(matches!(small.check_tail(&p, 1e-3), Err(Error::GridTooSmall(_))));
        // Cauchy: mass beyond L is (2/π) arctan-complement, ≈ 2t/(πL) for the stable part
        let big = SpaceTimeGrid::new(1, 8.0, 128, 0.05, 4).unwrap();
        assert!(big.check_tail(&p, 1e-2).unwrap() < 1e-2);
    }
}
