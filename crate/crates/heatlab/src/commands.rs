//! One pipeline per command. Each writes its CSV and JSON artifacts and
//! returns the invariants it asserted.

use anyhow::{bail, Result};
use heatkernel::drift::{DriftPreset, DriftSpec};
use heatkernel::duhamel::{
    duhamel_residual, estimate_tstar, extend_chapman_kolmogorov, generator_residual, sum_series, HeatKernelTable,
    SeriesOptions, SpaceTimeGrid, Source,
};
use heatkernel::envelopes::{beta_grid, fit_sandwich, free_kernel_lattice, log_lattice, Family};
use heatkernel::kato::kato_report;
use heatkernel::sde::{empirical_density, jump_count_check, l1_distance, simulate_paths, Binning, SimConfig};
use heatkernel::stable_kernel::{
    contraction_threshold, eval_density, grad_density, resolvent_apply, slice, GridField, StableParams, UniformGrid,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CommandName, RunConfig};
use crate::output::Output;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        pass,
        detail,
    }
}

pub struct Outcome {
    pub checks: Vec<Check>,
    pub report: Value,
}

pub fn run(config: &RunConfig, out: &mut Output) -> Result<Outcome> {
    match config.command {
        CommandName::Kernel => kernel(config, out),
        CommandName::Grad => grad(config, out),
        CommandName::Bounds => bounds(config, out),
        CommandName::Kato => kato(config, out),
        CommandName::Series => series(config, out),
        CommandName::Extend => extend(config, out),
        CommandName::Sde => sde(config, out),
        CommandName::Compare => compare(config, out),
        CommandName::Resolvent => resolvent(config, out),
        CommandName::Generator => generator(config, out),
    }
}

fn drift(config: &RunConfig) -> Result<DriftSpec> {
    Ok(config.drift.preset.parse::<DriftPreset>()?.build(config.params.d)?)
}

fn axis_point(d: usize, r: f64) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = r;
    x
}

fn kernel(config: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let p = config.stable()?;
    let g = &config.grid;
    let tol = if p.d == 1 { 1e-6 } else { 1e-4 };
    let mut rows = Vec::new();
    let mut per_time = Vec::new();
    let (mut worst_mass, mut min_value): (f64, f64) = (0.0, f64::INFINITY);
    for &t in &g.times {
        let mass = slice(&p, t)?.total_mass();
        worst_mass = worst_mass.max((mass - 1.0).abs());
        for k in 0..=g.n {
            let r = g.half_width * k as f64 / g.n as f64;
            let v = eval_density(&p, t, &axis_point(p.d, r))?;
            min_value = min_value.min(v);
            rows.push(vec![t, r, v]);
        }
        per_time.push(json!({ "t": t, "mass": mass }));
    }
    out.csv("kernel.csv", &["t", "r", "density"], &rows)?;
    Ok(Outcome {
        checks: vec![
            check("normalization", worst_mass <= tol, format!("largest |mass - 1| = {worst_mass:e} (tol {tol:e})")),
            check("positivity", min_value > 0.0, format!("smallest density {min_value:e}")),
        ],
        report: json!({ "slices": per_time }),
    })
}

fn grad(config: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let p = config.stable()?;
    let g = &config.grid;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &t in &g.times {
        let scale = t.sqrt() + p.a * t.powf(1.0 / p.alpha);
        let h = 1e-3 * scale;
        let peak = grad_density(&p, t, &axis_point(p.d, scale))?[0].abs();
        for k in 1..=g.n {
            let r = g.half_width * k as f64 / g.n as f64;
            let lift = grad_density(&p, t, &axis_point(p.d, r))?[0];
            let at = |s: f64| eval_density(&p, t, &axis_point(p.d, r + s));
            let fd = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
            let rel = (lift - fd).abs() / lift.abs().max(1e-300);
            // relative error is meaningful where the gradient is resolvable
            if lift.abs() > 1e-6 * peak {
                worst = worst.max(rel);
            }
            rows.push(vec![t, r, lift, fd, rel]);
        }
    }
    out.csv("grad.csv", &["t", "r", "dp_dr", "dp_dr_fd", "relative_error"], &rows)?;
    Ok(Outcome {
        checks: vec![check(
            "gradient identity",
            worst <= 1e-5,
            format!("worst relative error against finite differences {worst:e}"),
        )],
        report: json!({ "worst_relative_error": worst }),
    })
}

fn bounds(config: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let p = config.stable()?;
    let family = Family::of(&p);
    let lattice = log_lattice(config.t_max(), 8, 1);
    let points = free_kernel_lattice(&p, &lattice)?;
    let fit = fit_sandwich(family, &points, &beta_grid())?;
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|q| {
            vec![
                q.t,
                q.r,
                q.value,
                fit.lower.c * family.q(fit.lower.beta, q.t, q.r),
                fit.upper.c * family.q(fit.upper.beta, q.t, q.r),
            ]
        })
        .collect();
    out.csv("bounds.csv", &["t", "r", "value", "lower", "upper"], &rows)?;
    let finite = fit.upper.c.is_finite() && fit.lower.c > 0.0;
    let mut checks = vec![
        check("free sandwich constants", finite, format!("lower {:?}, upper {:?}", fit.lower, fit.upper)),
        check("free sandwich violations", fit.max_violation == 0.0, format!("max violation {:e}", fit.max_violation)),
    ];
    let mut report = json!({ "free": fit });
    let b = drift(config)?;
    if !b.is_zero() && p.d <= 2 {
        let (table, t_star) = summed_table(config, &p, &b, config.t_max().min(1.0), true)?;
        let pts = table.lattice(0, 0.9 * config.grid.half_width)?;
        let dfit = fit_sandwich(family, &pts, &beta_grid())?;
        checks.push(check(
            "drift sandwich violations",
            dfit.max_violation == 0.0 && dfit.upper.c.is_finite(),
            format!("t_* = {t_star}, ratio {:.4}", dfit.tightness),
        ));
        report["drift"] = serde_json::to_value(&dfit)?;
        report["t_star"] = json!(t_star);
    }
    Ok(Outcome { checks, report })
}

fn kato(config: &RunConfig, out: &mut Output) -> Result<Outcome> {
    let b = drift(config)?;
    let radii: Vec<f64> = (0..8).map(|k| 0.5f64.powi(k)).collect();
    let rep = kato_report(&b, config.params.alpha, &radii)?;
    let rows: Vec<Vec<f64>> = rep.radii.iter().zip(&rep.moduli).map(|(r, m)| vec![*r, *m]).collect();
    out.csv("kato.csv", &["r", "modulus"], &rows)?;
    let finite = rep.moduli.iter().all(|m| m.is_finite());
    let mut checks = vec![check("finite moduli", finite, format!("{:?}", rep.moduli))];
    if config.params.d >= 2 && !b.is_zero() {
        checks.push(check("modulus vanishes at small radii", rep.verdict, format!("tag {:?}", rep.tag)));
    }
    Ok(Outcome {
        checks,
        report: serde_json::to_value(&rep)?,
    })
}

fn source_grid(config: &RunConfig, t_max: f64, steps: usize) -> Result<SpaceTimeGrid> {
    let g = &config.grid;
    Ok(SpaceTimeGrid::new(config.params.d, g.half_width, g.n, t_max, steps)?)
}

fn series_dimension(config: &RunConfig) -> Result<()> {
    if config.params.d > 2 {
        bail!("params.d: the series runs in d = 1 or 2");
    }
    Ok(())
}

fn tstar(config: &RunConfig, p: &StableParams, b: &DriftSpec) -> Result<f64> {
    let probe = source_grid(config, 1.0, 1)?;
    let src = [Source::point(&probe, &config.run.x0)?];
    Ok(estimate_tstar(p, b, &probe, &src)?.t_star)
}

/// Series for the point source x0 on (0, t_max]; refuses times beyond t_*
/// when `strict`, otherwise clips to t_*.
fn summed_table(
    config: &RunConfig,
    p: &StableParams,
    b: &DriftSpec,
    t_max: f64,
    clip: bool,
) -> Result<(HeatKernelTable, f64)> {
    let t_star = tstar(config, p, b)?;
    let t_max = if clip { t_max.min(t_star) } else { t_max };
    if t_max > t_star * (1.0 + 1e-12) {
        bail!("contraction abort: requested t = {t_max} lies beyond the estimated t_* = {t_star}");
    }
    let grid = source_grid(config, t_max, config.grid.steps)?;
    let src = [Source::point(&grid, &config.run.x0)?];
    let options = SeriesOptions {
        tolerance: config.run.tolerance,
        ..SeriesOptions::default()
    };
    let (table, _) = sum_series(p, &grid, b, &src, &options)?;
    Ok((table, t_star))
}

fn slice_rows(grid: &SpaceTimeGrid, t: f64, values: &[&[f64]]) -> Vec<Vec<f64>> {
    grid.points()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut row = vec![t];
            row.extend_from_slice(x);
            row.extend(values.iter().map(|v| v[i]));
            row
        })
        .collect()
}

fn header<'a>(d: usize, tail: &[&'a str]) -> Vec<&'a str> {
    let mut h = vec!["t", "x"];
    if d == 2 {
        h.push("y");
    }
    h.extend_from_slice(tail);
    h
}

fn table_slice(table: &HeatKernelTable, t: f64) -> Result<usize> {
    table.slice_of(t).ok_or_else(|| {
        anyhow::anyhow!(
            "grid.times: t = {t} is not a multiple of the step {} (t_max / steps)",
            table.grid.tau
        )
    })
}

fn series(config: &RunConfig, out: &mut Output) -> Result<Outcome> {
    series_dimension(config)?;
    let p = config.stable()?;
    let b = drift(config)?;
    let t_star = tstar(config, &p, &b)?;
    let t_max = config.t_max();
    if t_max > t_star {
        bail!("contraction abort: requested t = {t_max} lies beyond the estimated t_* = {t_star}");
    }
    let grid = source_grid(config, t_max, config.grid.steps)?;
    let src = [Source::point(&grid, &config.run.x0)?];
    let options = SeriesOptions {
        tolerance: config.run.tolerance,
        ..SeriesOptions::default()
    };
    let (table, diag) = sum_series(&p, &grid, &b, &src, &options)?;
    let residual = duhamel_residual(&table, &b)?;
    let mut rows = Vec::new();
    for &t in &config.grid.times {
        let j = table_slice(&table, t)?;
        rows.extend(slice_rows(&grid, t, &[table.row(0, j)]));
    }
    out.csv("series.csv", &header(p.d, &["density"]), &rows)?;
    let defect = diag.mass_defect.iter().copied().fold(0.0, f64::max);
    Ok(Outcome {
        checks: vec![
            check("term ratio", diag.max_ratio <= 0.5, format!("largest ratio {:.4}", diag.max_ratio)),
            check("mass defect", defect <= 1e-3, format!("largest defect {defect:e}")),
            check("positivity", diag.raw_min >= -1e-6, format!("raw minimum {:e}", diag.raw_min)),
            check(
                "Duhamel residual",
                residual.max_relative <= 5.0 * options.tolerance,
                format!("relative residual {:e}", residual.max_relative),
            ),
        ],
        report: json!({ "t_star": t_star, "diagnostics": diag, "residual": residual }),
    })
}

fn extend(config: &RunConfig, out: &mut Output) -> Result<Outcome> {
    series_dimension(config)?;
    let p = config.stable()?;
    let b = drift(config)?;
    let t_star = tstar(config, &p, &b)?;
    let grid = source_grid(config, t_star, config.grid.steps.max(2))?;
    let src = [Source::point(&grid, &config.run.x0)?];
    let options = SeriesOptions {
        tolerance: config.run.tolerance,
        ..SeriesOptions::default()
    };
    let t_end = config.t_max().max(2.0 * t_star);
    let (table, _, report) = extend_chapman_kolmogorov(&p, &grid, &b, &src, &options, t_end, 64)?;
    let mut rows = Vec::new();
    for &t in &config.grid.times {
        let j = table_slice(&table, t)?;
        rows.extend(slice_rows(&table.grid, t, &[table.row(0, j)]));
    }
    out.csv("extend.csv", &header(p.d, &["density"]), &rows)?;
    let defect = table.mass_defects().iter().copied().fold(0.0, f64::max);
    Ok(Outcome {
        checks: vec![
            check(
                "composition residual",
                report.max_residual <= 3e-2,
                format!("largest residual {:e}", report.max_residual),
            ),
            check("mass defect", defect <= 1e-3, format!("largest defect {defect:e}")),
        ],
        report: serde_json::to_value(&report)?,
    })
}

fn simulate(config: &RunConfig, p: &StableParams, b: &DriftSpec) -> Result<heatkernel::sde::PathEnsemble> {
    let t_end = config.t_max();
    let steps = (t_end / config.run.dt).round().max(1.0) as usize;
    let mut sim = SimConfig::new(*p, b.clone(), config.run.x0.clone(), t_end, steps, config.run.paths, config.run.seed);
    sim.record_times = config.grid.times.clone();
    sim.record_jumps = true;
    // well above the per-step scale dt^{1/α}, so a recorded jump is a
    // single Lévy jump rather than an aggregate of small ones
    sim.jump_threshold = Some(1.0);
    Ok(simulate_paths(&sim)?)
}

fn sde(config: &RunConfig, out: &mut Output) -> Result<Outcome> {
    series_dimension(config)?;
    let p = config.stable()?;
    let b = drift(config)?;
    let ens = simulate(config, &p, &b)?;
    let grid = source_grid(config, config.t_max(), 1)?;
    let mut rows = Vec::new();
    let mut estimates = Vec::new();
    for &t in &config.grid.times {
        let est = empirical_density(&ens, t, &grid, Binning::Histogram)?;
        rows.extend(slice_rows(&grid, t, &[&est.values]));
        estimates.push(json!({ "t": t, "counted": est.counted, "sparse_mass": est.sparse_mass, "warnings": est.warnings }));
    }
    out.csv("sde.csv", &header(p.d, &["density"]), &rows)?;
    let count = jump_count_check(&ens, &p, config.t_max())?;
    let aborted = ens.aborted_fraction();
    let mut checks = vec![check("aborted paths", aborted <= 1e-3, format!("aborted fraction {aborted:e}"))];
    // with almost no expected jumps the standard error is degenerate
    if count.expected * config.run.paths as f64 >= 100.0 {
        checks.push(check(
            "jump count",
            count.agrees,
            format!("{:.5} ± {:.5} against {:.5}", count.observed, count.observed_se, count.expected),
        ));
    }
    Ok(Outcome {
        checks,
        report: json!({ "dt": ens.dt, "aborted": ens.aborted, "jump_count": count, "densities": estimates }),
    })
}

fn compare(config: &RunConfig, out: &mut Output) -> Result<Outcome> {
    series_dimension(config)?;
    let p = config.stable()?;
    let b = drift(config)?;
    let (table, t_star) = summed_table(config, &p, &b, config.t_max(), false)?;
    let ens = simulate(config, &p, &b)?;
    let limit = config.run.l1_threshold.unwrap_or(if b.is_zero() { 0.03 } else { 0.05 });
    let mut rows = Vec::new();
    let mut distances = Vec::new();
    let mut checks = Vec::new();
    for &t in &config.grid.times {
        let j = table_slice(&table, t)?;
        let est = empirical_density(&ens, t, &table.grid, Binning::Histogram)?;
        let l1 = l1_distance(&table.grid, &est.values, table.row(0, j));
        rows.extend(slice_rows(&table.grid, t, &[table.row(0, j), &est.values]));
        distances.push(json!({ "t": t, "l1": l1 }));
        checks.push(check(&format!("L1 at t = {t}"), l1 <= limit, format!("{l1:.5} (limit {limit})")));
    }
    out.csv("compare.csv", &header(p.d, &["table", "monte_carlo"]), &rows)?;
    Ok(Outcome {
        checks,
        report: json!({ "t_star": t_star, "threshold": limit, "distances": distances, "aborted": ens.aborted }),
    })
}

fn resolvent(config: &RunConfig, out: &mut Output) -> Result<Outcome> {
    series_dimension(config)?;
    let p = config.stable()?;
    let b = drift(config)?;
    let g = &config.grid;
    let h = 2.0 * g.half_width / g.n as f64;
    let grid = UniformGrid::new(p.d, -g.half_width, h, g.n + 1)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &lambda in &config.run.lambdas {
        let u = resolvent_apply(&p, lambda, &GridField::constant(&grid, 1.0), &grid, false)?;
        let gap = u.values.iter().map(|v| (v - 1.0 / lambda).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
        rows.push(vec![lambda, gap]);
    }
    out.csv("resolvent.csv", &["lambda", "gap_to_inverse"], &rows)?;
    let mut checks = vec![check("U_lambda 1 = 1/lambda", worst <= 1e-6, format!("worst gap {worst:e}"))];
    let mut report = json!({ "worst_gap": worst });
    if !b.is_zero() {
        let f = GridField::sampled(&grid, |x| (-x.iter().map(|v| v * v).sum::<f64>()).exp());
        let full = contraction_threshold(&p, &b, &f, &grid, 1e-3)?;
        let half = contraction_threshold(&p, &b.scaled(0.5)?, &f, &grid, 1e-3)?;
        let probes: Vec<Vec<f64>> = full.probes.iter().map(|(l, s)| vec![*l, *s]).collect();
        out.csv("contraction.csv", &["lambda", "sup_gradient"], &probes)?;
        checks.push(check(
            "contraction threshold",
            full.lambda0.is_finite() && half.lambda0 <= full.lambda0,
            format!("lambda0 {:.5}, halved drift {:.5}", full.lambda0, half.lambda0),
        ));
        report["contraction"] = serde_json::to_value(&full)?;
        report["contraction_half_drift"] = serde_json::to_value(&half)?;
    }
    Ok(Outcome { checks, report })
}

fn generator(config: &RunConfig, out: &mut Output) -> Result<Outcome> {
    if config.params.d != 1 {
        bail!("params.d: the generator check runs in d = 1");
    }
    let p = config.stable()?;
    let b = drift(config)?;
    let f = |x: f64| (-(x - 0.3) * (x - 0.3)).exp();
    let g = |x: f64| (-(x + 0.2) * (x + 0.2) / 0.5).exp();
    let [lo, hi] = config.run.levels;
    let options = SeriesOptions {
        tolerance: config.run.tolerance,
        ..SeriesOptions::default()
    };
    let rep = generator_residual(&p, &b, config.grid.half_width, config.grid.n, &f, &g, lo..=hi, &options)?;
    let rows: Vec<Vec<f64>> = rep
        .times
        .iter()
        .zip(&rep.quotients)
        .zip(&rep.errors)
        .map(|((t, q), e)| vec![*t, *q, *e])
        .collect();
    out.csv("generator.csv", &["t", "quotient", "error"], &rows)?;
    let tail = &rep.halving[rep.halving.len().saturating_sub(3)..];
    let pass = tail.len() == 3 && tail.iter().all(|h| (1.4..=2.6).contains(h));
    Ok(Outcome {
        checks: vec![check("first-order convergence", pass, format!("last halving ratios {tail:?}"))],
        report: serde_json::to_value(&rep)?,
    })
}
