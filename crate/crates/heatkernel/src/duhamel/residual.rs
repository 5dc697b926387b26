//! Checks on a summed table: the Duhamel identity on the grid, and the weak
//! generator limit (∫ f p_t g - ∫ f g)/t → ∫ (ℒf) g.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::grid::{SpaceTimeGrid, Source};
use super::series::{build_table_p0, sum_series, HeatKernelTable, PicardEngine, SeriesOptions};
use crate::drift::DriftSpec;
use crate::stable_kernel::{char_exponent, StableParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// (t, ‖R(t)‖_∞ / ‖p(t)‖_∞), largest over sources
    pub per_slice: Vec<(f64, f64)>,
    pub max_relative: f64,
}

/// R = p - p^a - ∫∫ p(t - s, x, z) b(z)·∇p^a(s, z, y) dz ds, with the time
/// and space quadrature of the series itself.
pub fn duhamel_residual(table: &HeatKernelTable, drift: &DriftSpec) -> Result<ResidualReport> {
    let grid = &table.grid;
    let free = build_table_p0(&table.params, grid, &table.sources)?;
    let engine = PicardEngine::new(&table.params, grid, drift)?;
    let mut worst = vec![0.0f64; grid.steps];
    for (s, src) in table.sources.iter().enumerate() {
        let first = engine.step_source(src, None)?;
        let rest: Vec<Vec<f64>> = table.values[s]
            .iter()
            .zip(&free.values[s])
            .map(|(p, p0)| p.iter().zip(p0).map(|(a, b)| a - b).collect())
            .collect();
        let later = engine.step_source(src, Some(&rest))?;
        for j in 0..grid.steps {
            let p = &table.values[s][j];
            let mut r: f64 = 0.0;
            let mut norm: f64 = 0.0;
            for y in 0..p.len() {
                r = r.max((p[y] - free.values[s][j][y] - first[j][y] - later[j][y]).abs());
                norm = norm.max(p[y].abs());
            }
            worst[j] = worst[j].max(r / norm);
        }
    }
    Ok(ResidualReport {
        per_slice: worst.iter().enumerate().map(|(j, r)| (grid.time(j + 1), *r)).collect(),
        max_relative: worst.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorReport {
    pub times: Vec<f64>,
    /// (∫∫ f(y) g(x) p(t, x, y) - ∫ f g) / t
    pub quotients: Vec<f64>,
    /// ∫ (ℒf) g
    pub target: f64,
    pub errors: Vec<f64>,
    /// errors[k] / errors[k + 1], ≈ 2 for first-order convergence
    pub halving: Vec<f64>,
}

/// ∫ (Δf + a^αΔ^{α/2}f + b f') g, d = 1. The nonlocal part is applied
/// spectrally on a periodic box wide enough that f and g have decayed.
pub fn generator_target(
    params: &StableParams,
    drift: &DriftSpec,
    f: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    half_width: f64,
    points: usize,
) -> f64 {
    let n = points;
    let dx = 2.0 * half_width / n as f64;
    let xs: Vec<f64> = (0..n).map(|i| -half_width + i as f64 * dx).collect();
    let mut buf: Vec<Complex<f64>> = xs.iter().map(|&x| Complex::new(f(x), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let omega = 2.0 * std::f64::consts::PI / (n as f64 * dx);
    let mut grad = buf.clone();
    for (k, (v, w)) in buf.iter_mut().zip(grad.iter_mut()).enumerate() {
        let m = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let xi = m * omega;
        *v *= -char_exponent(params, &[xi]);
        *w *= if k == n / 2 { Complex::new(0.0, 0.0) } else { Complex::new(0.0, xi) };
    }
    let inverse = planner.plan_fft_inverse(n);
    inverse.process(&mut buf);
    inverse.process(&mut grad);
    let scale = 1.0 / n as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| (buf[i].re + drift.first_component(&[x]) * grad[i].re) * scale * g(x) * dx)
        .sum()
}

/// Difference quotients at t = 2^{-k}, k in `levels`, from a table whose
/// source is the density g, against the spectral target.
pub fn generator_residual(
    params: &StableParams,
    drift: &DriftSpec,
    half_width: f64,
    n: usize,
    f: &dyn Fn(f64) -> f64,
    g: &dyn Fn(f64) -> f64,
    levels: std::ops::RangeInclusive<u32>,
    options: &SeriesOptions,
) -> Result<GeneratorReport> {
    if params.d != 1 {
        return Err(Error::Unsupported("the generator check runs in d = 1".into()));
    }
    let (lo, hi) = (*levels.start(), *levels.end());
    if lo > hi || hi > 20 {
        return Err(Error::Domain("levels must be an increasing range below 2^-20".into()));
    }
    let steps = 1usize << (hi - lo);
    let grid = SpaceTimeGrid::new(1, half_width, n, 0.5f64.powi(lo as i32), steps)?;
    let source = Source::density(&grid, |x| g(x[0]));
    let (table, _) = sum_series(params, &grid, drift, std::slice::from_ref(&source), options)?;
    let h = grid.h();
    let fv: Vec<f64> = grid.points().iter().map(|x| f(x[0])).collect();
    let Source::Density { values: gv } = &source else { unreachable!() };
    let base: f64 = h * fv.iter().zip(gv).map(|(a, b)| a * b).sum::<f64>();
    let periodic = (4.0 * half_width).max(32.0);
    let target = generator_target(params, drift, f, g, periodic, 1 << 14);
    let mut times = Vec::new();
    let mut quotients = Vec::new();
    for k in lo..=hi {
        let t = 0.5f64.powi(k as i32);
        let j = table.slice_of(t).expect("dyadic level on the grid");
        let pf: f64 = h * fv.iter().zip(table.row(0, j)).map(|(a, b)| a * b).sum::<f64>();
        times.push(t);
        quotients.push((pf - base) / t);
    }
    let errors: Vec<f64> = quotients.iter().map(|q| q - target).collect();
    let halving = errors.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(GeneratorReport {
        times,
        quotients,
        target,
        errors,
        halving,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_target_matches_heat_part() {
        // a → 0 and b ≡ 0: ∫ f'' g for Gaussians
        let p = StableParams::new(1, 1.0, 1e-12, 1.0).unwrap();
        let f = |x: f64| (-x * x).exp();
        let g = |x: f64| (-(x - 0.5) * (x - 0.5)).exp();
        let t = generator_target(&p, &DriftSpec::zero(1), &f, &g, 32.0, 1 << 12);
        // ∫ (4x² - 2) e^{-x²} e^{-(x-½)²} dx in closed form
        let exact = {
            let c = (-0.125f64).exp() * (std::f64::consts::PI / 2.0).sqrt();
            // moments of N(¼, ¼): E[x²] = 1/16 + 1/4
            c * (4.0 * (1.0 / 16.0 + 0.25) - 2.0)
        };
        assert!((t - exact).abs() < 1e-10, "{t} vs {exact}");
    }
}
