//! Monte Carlo for dX = dZ^a + b(X) dt.
//!
//! Z^a is Brownian motion run at the clock t + a²S_t with S the α/2-stable
//! subordinator, so one increment is a centred Gaussian with per-axis
//! variance 2(dt + a²S_dt). Paths use Euler steps; each path owns the
//! ChaCha stream numbered by its index, so ensembles do not depend on how
//! the work is scheduled.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::drift::DriftSpec;
use crate::duhamel::SpaceTimeGrid;
use crate::quad::GaussLegendre;
use crate::special::sphere_area;
use crate::stable_kernel::{levy_constant, levy_density, StableParams};
use crate::{Error, Result};

/// One increment of the subordinator with E e^{-λS_t} = e^{-tλ^β}, β in (0, 1),
/// by Kanter's representation.
pub fn sample_subordinator_increment<R: Rng + ?Sized>(beta: f64, dt: f64, rng: &mut R) -> f64 {
    // U uniform on (0, π), E standard exponential
    let u = PI * open_unit(rng);
    let e: f64 = rng.sample(Exp1);
    let a = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let b = ((1.0 - beta) * u).sin() / e;
    dt.powf(1.0 / beta) * a * b.powf((1.0 - beta) / beta)
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Increment of Z^a over dt, split into the Brownian part and the
/// subordinated part B_{a²S}.
fn levy_parts<R: Rng + ?Sized>(params: &StableParams, dt: f64, rng: &mut R, brown: &mut [f64], jump: &mut [f64]) {
    let sd = (2.0 * dt).sqrt();
    for v in brown.iter_mut() {
        *v = sd * rng.sample::<f64, _>(StandardNormal);
    }
    if params.a == 0.0 {
        jump.fill(0.0);
        return;
    }
    let s = sample_subordinator_increment(0.5 * params.alpha, dt, rng);
    let sj = (2.0 * params.a * params.a * s).sqrt();
    for v in jump.iter_mut() {
        *v = sj * rng.sample::<f64, _>(StandardNormal);
    }
}

/// Centred Gaussian with per-axis variance 2(dt + a²S_dt).
pub fn sample_levy_increment<R: Rng + ?Sized>(params: &StableParams, dt: f64, rng: &mut R) -> Vec<f64> {
    let mut b = vec![0.0; params.d];
    let mut j = vec![0.0; params.d];
    levy_parts(params, dt, rng, &mut b, &mut j);
    b.iter().zip(&j).map(|(x, y)| x + y).collect()
}

/// Closed ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist2(x, &self.center) <= self.radius * self.radius
    }

    fn disjoint(&self, other: &Ball) -> bool {
        dist2(&self.center, &other.center).sqrt() > self.radius + other.radius
    }
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// ∫_B J^a(x, y) dy for x outside B.
pub fn levy_mass(params: &StableParams, x: &[f64], b: &Ball) -> Result<f64> {
    if b.contains(x) {
        return Err(Error::Singular("Lévy mass of a ball containing the point".into()));
    }
    match params.d {
        1 => {
            let c = params.jump_weight() * levy_constant(1, params.alpha)? / params.alpha;
            let (lo, hi) = (b.center[0] - b.radius, b.center[0] + b.radius);
            let (near, far) = if x[0] < lo { (lo - x[0], hi - x[0]) } else { (x[0] - hi, x[0] - lo) };
            Ok(c * (near.powf(-params.alpha) - far.powf(-params.alpha)))
        }
        2 => {
            let gr = GaussLegendre::new(24);
            let gt = GaussLegendre::new(48);
            let mut acc = 0.0;
            for (r, wr) in gr.mapped(0.0, b.radius) {
                for (th, wt) in gt.mapped(0.0, 2.0 * PI) {
                    let y = [b.center[0] + r * th.cos(), b.center[1] + r * th.sin()];
                    acc += wr * wt * r * levy_density(params, x, &y)?;
                }
            }
            Ok(acc)
        }
        _ => Err(Error::Unsupported("Lévy masses are implemented for d ≤ 2".into())),
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: StableParams,
    pub drift: DriftSpec,
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    /// jumps of the subordinated part larger than this are recorded; 3√dt if unset
    pub jump_threshold: Option<f64>,
    /// times at which positions are stored (rounded to steps); t_end if empty
    pub record_times: Vec<f64>,
    pub record_jumps: bool,
    /// (A, B) pairs whose Lévy-system prediction is accumulated along paths
    pub levy_pairs: Vec<(Ball, Ball)>,
    /// paths leaving the cube of this half-width about x0 are aborted
    pub safety_radius: f64,
    /// |b| cap for stepping; for singular drifts defaults to |b| at √dt from the focus
    pub drift_cap: Option<f64>,
}

impl SimConfig {
    pub fn new(params: StableParams, drift: DriftSpec, x0: Vec<f64>, t_end: f64, steps: usize, paths: usize, seed: u64) -> Self {
        Self {
            params,
            drift,
            x0,
            t_end,
            dt: t_end / steps.max(1) as f64,
            paths,
            seed,
            jump_threshold: None,
            record_times: Vec::new(),
            record_jumps: false,
            levy_pairs: Vec::new(),
            safety_radius: 1e3,
            drift_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.paths == 0 || !(self.t_end >= self.dt * (1.0 - 1e-12)) {
            return Err(Error::Domain("need dt > 0, at least one path and t_end ≥ dt".into()));
        }
        if self.x0.len() != self.params.d || self.drift.d != self.params.d {
            return Err(Error::Domain("start point, drift and kernel dimensions differ".into()));
        }
        for (a, b) in &self.levy_pairs {
            if a.center.len() != self.params.d || b.center.len() != self.params.d {
                return Err(Error::Domain("ball dimension does not match".into()));
            }
            if !a.disjoint(b) {
                return Err(Error::Domain("Lévy-system regions must be disjoint".into()));
            }
        }
        if self.record_times.iter().any(|&t| !(t > 0.0) || t > self.t_end * (1.0 + 1e-12)) {
            return Err(Error::Domain("record times must lie in (0, t_end]".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    pub fn threshold(&self) -> f64 {
        self.jump_threshold.unwrap_or(3.0 * self.dt.sqrt())
    }

    pub fn cap(&self) -> Option<f64> {
        if self.drift_cap.is_some() {
            return self.drift_cap;
        }
        let singular = self.drift.radial().is_some_and(|(_, p)| p.singular());
        singular.then(|| {
            let mut x = vec![0.0; self.params.d];
            x[0] = self.drift.focus() + self.dt.sqrt();
            self.drift.magnitude(&x)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpRecord {
    pub time: f64,
    /// position just before the jump (after the continuous part of the step)
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

impl JumpRecord {
    pub fn size(&self) -> f64 {
        dist2(&self.pre, &self.post).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEnsemble {
    pub d: usize,
    pub dt: f64,
    pub seed: u64,
    pub paths: usize,
    pub jump_threshold: f64,
    /// stored times and the step index of each
    pub times: Vec<f64>,
    pub steps_at: Vec<usize>,
    /// positions[time][path * d + axis]; NaN for aborted paths
    pub positions: Vec<Vec<f64>>,
    /// per-path jump records (empty unless recorded)
    pub jumps: Vec<Vec<JumpRecord>>,
    /// the tracked (A, B) pairs and per-path Σ dt 1_A(X) ∫_B J(X, y) dy
    pub levy_pairs: Vec<(Ball, Ball)>,
    pub levy_predictions: Vec<Vec<f64>>,
    pub aborted: usize,
}

impl PathEnsemble {
    /// Stream number of a path under the master seed.
    pub fn stream_of(&self, path: usize) -> u64 {
        path as u64
    }

    pub fn aborted_fraction(&self) -> f64 {
        self.aborted as f64 / self.paths as f64
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t.max(self.dt))
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

struct PathResult {
    positions: Vec<Vec<f64>>,
    jumps: Vec<JumpRecord>,
    levy: Vec<f64>,
    aborted: bool,
}

/// Euler scheme X_{k+1} = X_k + ΔZ^a + b(X_k) dt.
pub fn simulate_paths(config: &SimConfig) -> Result<PathEnsemble> {
    config.validate()?;
    let d = config.params.d;
    let steps = config.steps();
    let dt = config.dt;
    let mut steps_at: Vec<usize> = if config.record_times.is_empty() {
        vec![steps]
    } else {
        config
            .record_times
            .iter()
            .map(|t| ((t / dt).round() as usize).clamp(1, steps))
            .collect()
    };
    steps_at.sort_unstable();
    steps_at.dedup();
    let rho = config.threshold();
    let cap = config.cap();
    let pairs = &config.levy_pairs;
    let result: Vec<PathResult> = (0..config.paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(config.seed, path);
            let mut x = config.x0.clone();
            let mut brown = vec![0.0; d];
            let mut jump = vec![0.0; d];
            let mut out = PathResult {
                positions: Vec::with_capacity(steps_at.len()),
                jumps: Vec::new(),
                levy: vec![0.0; pairs.len()],
                aborted: false,
            };
            let mut next = 0;
            for k in 0..steps {
                for (i, (a, b)) in pairs.iter().enumerate() {
                    if a.contains(&x) {
                        out.levy[i] += dt * levy_mass(&config.params, &x, b).unwrap_or(0.0);
                    }
                }
                let drift = match cap {
                    Some(c) => config.drift.first_component_capped(&x, c),
                    None => config.drift.first_component(&x),
                };
                levy_parts(&config.params, dt, &mut rng, &mut brown, &mut jump);
                for i in 0..d {
                    x[i] += brown[i];
                }
                x[0] += drift * dt;
                let big = config.record_jumps && jump.iter().map(|v| v * v).sum::<f64>() > rho * rho;
                let pre = if big { Some(x.clone()) } else { None };
                for i in 0..d {
                    x[i] += jump[i];
                }
                if let Some(pre) = pre {
                    out.jumps.push(JumpRecord {
                        time: (k + 1) as f64 * dt,
                        pre,
                        post: x.clone(),
                    });
                }
                if x.iter().zip(&config.x0).any(|(a, b)| (a - b).abs() > config.safety_radius) {
                    out.aborted = true;
                    break;
                }
                while next < steps_at.len() && steps_at[next] == k + 1 {
                    out.positions.push(x.clone());
                    next += 1;
                }
            }
            out
        })
        .collect();
    let mut positions = vec![Vec::with_capacity(config.paths * d); steps_at.len()];
    let mut jumps = Vec::with_capacity(if config.record_jumps { config.paths } else { 0 });
    let mut levy_predictions = vec![Vec::with_capacity(config.paths); pairs.len()];
    let mut aborted = 0;
    for r in result {
        if r.aborted {
            aborted += 1;
        }
        for (i, slot) in positions.iter_mut().enumerate() {
            match r.positions.get(i) {
                Some(p) if !r.aborted => slot.extend_from_slice(p),
                _ => slot.extend(std::iter::repeat_n(f64::NAN, d)),
            }
        }
        if config.record_jumps {
            jumps.push(r.jumps);
        }
        for (i, v) in r.levy.into_iter().enumerate() {
            levy_predictions[i].push(v);
        }
    }
    Ok(PathEnsemble {
        d,
        dt,
        seed: config.seed,
        paths: config.paths,
        jump_threshold: rho,
        times: steps_at.iter().map(|&k| k as f64 * dt).collect(),
        steps_at,
        positions,
        jumps,
        levy_pairs: pairs.clone(),
        levy_predictions,
        aborted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Binning {
    /// node-centred cells of the grid
    Histogram,
    /// histogram smoothed by a Gaussian of the given standard deviation
    Kernel { bandwidth: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub values: Vec<f64>,
    /// paths that landed in the box
    pub counted: usize,
    /// cells whose expected count is below 10 while holding estimate mass
    pub sparse_cells: usize,
    /// estimate mass in those cells
    pub sparse_mass: f64,
    pub warnings: Vec<String>,
}

/// Histogram (or smoothed histogram) of the positions at time t on the
/// grid nodes, normalised to unit mass h^d Σ values = 1.
pub fn empirical_density(ensemble: &PathEnsemble, t: f64, grid: &SpaceTimeGrid, binning: Binning) -> Result<DensityEstimate> {
    if grid.d != ensemble.d {
        return Err(Error::Domain("grid and ensemble dimensions differ".into()));
    }
    let i = ensemble
        .time_index(t)
        .ok_or_else(|| Error::Domain(format!("time {t} was not stored")))?;
    let d = grid.d;
    let mut counts = vec![0u64; grid.len()];
    let e = grid.half_width + 0.5 * grid.h();
    for x in ensemble.positions[i].chunks_exact(d) {
        if x[0].is_nan() || x.iter().any(|v| v.abs() > e) {
            continue;
        }
        counts[grid.nearest(x)] += 1;
    }
    let counted: u64 = counts.iter().sum();
    if counted == 0 {
        return Err(Error::Domain("no path ended inside the grid".into()));
    }
    let cell = grid.cell();
    let mut values: Vec<f64> = counts.iter().map(|&c| c as f64 / (counted as f64 * cell)).collect();
    if let Binning::Kernel { bandwidth } = binning {
        if !(bandwidth > 0.0) {
            return Err(Error::Domain("bandwidth must be positive".into()));
        }
        values = smooth(grid, &values, bandwidth);
        let mass: f64 = cell * values.iter().sum::<f64>();
        values.iter_mut().for_each(|v| *v /= mass);
    }
    let mut sparse_cells = 0;
    let mut sparse_mass = 0.0;
    for v in &values {
        if *v > 0.0 && v * cell * (counted as f64) < 10.0 {
            sparse_cells += 1;
            sparse_mass += v * cell;
        }
    }
    let mut warnings = Vec::new();
    if sparse_mass > 0.01 {
        warnings.push(format!(
            "undersampled: {sparse_cells} cells with expected count below 10 hold {sparse_mass:.3} of the mass"
        ));
    }
    Ok(DensityEstimate {
        values,
        counted: counted as usize,
        sparse_cells,
        sparse_mass,
        warnings,
    })
}

/// Separable Gaussian smoothing on the node lattice.
fn smooth(grid: &SpaceTimeGrid, values: &[f64], bandwidth: f64) -> Vec<f64> {
    let h = grid.h();
    let reach = ((4.0 * bandwidth / h).ceil() as i64).max(1);
    let w: Vec<f64> = (-reach..=reach)
        .map(|q| (-0.5 * (q as f64 * h / bandwidth).powi(2)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / total).collect();
    let per = grid.per_axis() as i64;
    let pass = |src: &[f64], stride: i64| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let pos = (idx as i64 / stride) % per;
            for (k, wk) in w.iter().enumerate() {
                let q = k as i64 - reach;
                let p = pos + q;
                if (0..per).contains(&p) {
                    *o += wk * src[(idx as i64 + q * stride) as usize];
                }
            }
        }
        out
    };
    let mut v = pass(values, 1);
    if grid.d == 2 {
        v = pass(&v, per);
    }
    v
}

/// h^d Σ |u - v|.
pub fn l1_distance(grid: &SpaceTimeGrid, u: &[f64], v: &[f64]) -> f64 {
    grid.cell() * u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn mean_se(v: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in v {
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, (var / n.max(1) as f64).sqrt(), n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpRateReport {
    /// recorded A → B jumps per path
    pub observed: f64,
    pub observed_se: f64,
    /// E ∫ 1_A(X_s) ∫_B J(X_s, y) dy ds per path
    pub predicted: f64,
    pub predicted_se: f64,
    /// |observed - predicted| / sqrt(se_o² + se_p²)
    pub z: f64,
    pub agrees: bool,
    pub warnings: Vec<String>,
}

/// Lévy-system check for a tracked pair (A, B) over [0, t].
pub fn jump_rate_check(ensemble: &PathEnsemble, a: &Ball, b: &Ball, t: f64) -> Result<JumpRateReport> {
    let pair = ensemble
        .levy_pairs
        .iter()
        .position(|(x, y)| x == a && y == b)
        .ok_or_else(|| Error::Domain("the pair (A, B) was not tracked during simulation".into()))?;
    if ensemble.jumps.is_empty() {
        return Err(Error::Domain("the ensemble holds no jump records".into()));
    }
    if (t - ensemble.times.last().copied().unwrap_or(0.0)).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::Domain("the Lévy-system prediction is accumulated over the full horizon".into()));
    }
    let gap = dist2(&a.center, &b.center).sqrt() - a.radius - b.radius;
    let mut warnings = Vec::new();
    if gap <= ensemble.jump_threshold {
        warnings.push("A and B are closer than the recording threshold; short jumps are missed".into());
    }
    let (observed, observed_se, _) = mean_se(ensemble.jumps.iter().map(|js| {
        js.iter()
            .filter(|j| j.time <= t * (1.0 + 1e-12) && a.contains(&j.pre) && b.contains(&j.post))
            .count() as f64
    }));
    let (predicted, predicted_se, _) = mean_se(ensemble.levy_predictions[pair].iter().copied());
    let se = (observed_se * observed_se + predicted_se * predicted_se).sqrt();
    if observed * (ensemble.paths as f64) < 10.0 {
        warnings.push("fewer than 10 A → B jumps observed".into());
    }
    let z = if se > 0.0 { (observed - predicted).abs() / se } else { 0.0 };
    Ok(JumpRateReport {
        observed,
        observed_se,
        predicted,
        predicted_se,
        z,
        agrees: (observed - predicted).abs() <= 3.0 * se,
        warnings,
    })
}

/// Expected number of jumps of Z^a larger than ρ per path over [0, t]:
/// t a^α 𝒜 ω_{d-1} ρ^{-α} / α.
pub fn expected_jump_count(params: &StableParams, rho: f64, t: f64) -> Result<f64> {
    Ok(t * params.jump_weight() * levy_constant(params.d, params.alpha)? * sphere_area(params.d) * rho.powf(-params.alpha)
        / params.alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpCountReport {
    pub threshold: f64,
    pub observed: f64,
    pub observed_se: f64,
    pub expected: f64,
    pub agrees: bool,
}

/// Mean number of recorded jumps per path against the closed-form rate.
pub fn jump_count_check(ensemble: &PathEnsemble, params: &StableParams, t: f64) -> Result<JumpCountReport> {
    if ensemble.jumps.is_empty() {
        return Err(Error::Domain("the ensemble holds no jump records".into()));
    }
    let rho = ensemble.jump_threshold;
    let (observed, observed_se, _) = mean_se(
        ensemble
            .jumps
            .iter()
            .map(|js| js.iter().filter(|j| j.time <= t * (1.0 + 1e-12)).count() as f64),
    );
    let expected = expected_jump_count(params, rho, t)?;
    Ok(JumpCountReport {
        threshold: rho,
        observed,
        observed_se,
        expected,
        agrees: (observed - expected).abs() <= 3.0 * observed_se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitReport {
    pub radius: f64,
    /// (κ, P(τ ≤ κr²), standard error), κ descending
    pub probabilities: Vec<(f64, f64, f64)>,
    /// largest tested κ with probability ≤ ½
    pub kappa: Option<f64>,
    pub warnings: Vec<String>,
}

/// P(exit from B(x₀, r) before κr²) for each κ, by discretely monitored
/// Euler paths.
pub fn exit_time_stats(
    params: &StableParams,
    drift: &DriftSpec,
    x0: &[f64],
    r: f64,
    kappas: &[f64],
    paths: usize,
    dt: f64,
    seed: u64,
) -> Result<ExitReport> {
    if kappas.is_empty() || kappas.iter().any(|k| !(*k > 0.0)) || !(r > 0.0) || !(dt > 0.0) || paths == 0 {
        return Err(Error::Domain("need positive radius, step, path count and κ values".into()));
    }
    let mut ks = kappas.to_vec();
    ks.sort_by(|a, b| b.total_cmp(a));
    let horizon = ks[0] * r * r;
    let steps = (horizon / dt).ceil() as usize;
    let mut warnings = Vec::new();
    let smallest = ks[ks.len() - 1];
    if dt > smallest * r * r / 64.0 {
        warnings.push(format!("step {dt:e} exceeds κr²/64 for κ = {smallest}"));
    }
    let probe = SimConfig::new(*params, drift.clone(), x0.to_vec(), horizon, steps, 1, seed);
    probe.validate()?;
    let cap = probe.cap();
    let d = params.d;
    let exits: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(seed, path);
            let mut x = x0.to_vec();
            let mut brown = vec![0.0; d];
            let mut jump = vec![0.0; d];
            for k in 0..steps {
                let b = match cap {
                    Some(c) => drift.first_component_capped(&x, c),
                    None => drift.first_component(&x),
                };
                levy_parts(params, dt, &mut rng, &mut brown, &mut jump);
                for i in 0..d {
                    x[i] += brown[i] + jump[i];
                }
                x[0] += b * dt;
                if dist2(&x, x0) > r * r {
                    return (k + 1) as f64 * dt;
                }
            }
            f64::INFINITY
        })
        .collect();
    let probabilities: Vec<(f64, f64, f64)> = ks
        .iter()
        .map(|&k| {
            let p = exits.iter().filter(|&&e| e <= k * r * r * (1.0 + 1e-12)).count() as f64 / paths as f64;
            (k, p, (p * (1.0 - p) / paths as f64).sqrt())
        })
        .collect();
    let kappa = probabilities.iter().find(|(_, p, _)| *p <= 0.5).map(|(k, _, _)| *k);
    Ok(ExitReport {
        radius: r,
        probabilities,
        kappa,
        warnings,
    })
}

/// P(τ ≤ t) for Brownian motion with E[B_t²] = 2t leaving (-r, r) from 0.
pub fn brownian_exit_probability(r: f64, t: f64) -> f64 {
    let mut survive = 0.0;
    for k in 0..200 {
        let m = (2 * k + 1) as f64;
        let term = (4.0 / PI) * if k % 2 == 0 { 1.0 } else { -1.0 } / m * (-(m * PI / (2.0 * r)).powi(2) * t).exp();
        survive += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    1.0 - survive
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize, alpha: f64, a: f64) -> StableParams {
        StableParams::new(d, alpha, a, 2.0).unwrap()
    }

    #[test]
    fn subordinator_laplace_transform() {
        let mut rng = path_rng(7, 0);
        let n = 200_000;
        let dt = 0.3;
        let (m, se, _) = mean_se((0..n).map(|_| (-sample_subordinator_increment(0.75, dt, &mut rng)).exp()));
        assert!((m - (-dt).exp()).abs() < 3.0 * se, "{m} vs {}", (-dt).exp());
    }

    #[test]
    fn subordinator_is_positive() {
        let mut rng = path_rng(1, 3);
        for beta in [0.25, 0.5, 0.9] {
            for _ in 0..10_000 {
                assert!(sample_subordinator_increment(beta, 0.01, &mut rng) > 0.0);
            }
        }
    }

    #[test]
    fn increment_characteristic_function() {
        let p = params(1, 1.2, 1.0);
        let dt = 0.4;
        let mut rng = path_rng(11, 0);
        let (m, se, _) = mean_se((0..200_000).map(|_| sample_levy_increment(&p, dt, &mut rng)[0].cos()));
        let exact = (-dt * 2.0).exp();
        assert!((m - exact).abs() < 3.0 * se, "{m} vs {exact}");
    }

    #[test]
    fn brownian_variance_without_jumps() {
        let p = params(2, 1.0, 1e-9);
        let cfg = SimConfig::new(p, DriftSpec::zero(2), vec![0.0, 0.0], 0.5, 8, 20_000, 5);
        let e = simulate_paths(&cfg).unwrap();
        let (m, se, _) = mean_se(e.positions[0].chunks(2).map(|x| x[0] * x[0]));
        assert!((m - 1.0).abs() < 3.0 * se + 1e-3, "{m}");
        let (c, cse, _) = mean_se(e.positions[0].chunks(2).map(|x| x[0] * x[1]));
        assert!(c.abs() < 3.0 * cse);
    }

    #[test]
    fn constant_drift_shifts_the_mean() {
        let p = params(1, 1.5, 0.5);
        let cfg = SimConfig::new(p, DriftSpec::constant(1, 0.8), vec![0.2], 1.0, 16, 20_000, 9);
        let e = simulate_paths(&cfg).unwrap();
        let (m, se, _) = mean_se(e.positions[0].iter().copied());
        assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn ensembles_are_reproducible() {
        let p = params(1, 1.0, 1.0);
        let mut cfg = SimConfig::new(p, DriftSpec::bump(1, 1.0, 0.0, 1.0).unwrap(), vec![0.0], 0.1, 10, 500, 42);
        cfg.record_jumps = true;
        let a = simulate_paths(&cfg).unwrap();
        let b = simulate_paths(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 43;
        assert_ne!(a.positions, simulate_paths(&cfg).unwrap().positions);
    }

    #[test]
    fn histogram_has_unit_mass() {
        let p = params(1, 1.0, 1.0);
        let cfg = SimConfig::new(p, DriftSpec::zero(1), vec![0.0], 0.2, 4, 5_000, 3);
        let e = simulate_paths(&cfg).unwrap();
        let g = SpaceTimeGrid::new(1, 8.0, 64, 1.0, 1).unwrap();
        for binning in [Binning::Histogram, Binning::Kernel { bandwidth: 0.3 }] {
            let est = empirical_density(&e, 0.2, &g, binning).unwrap();
            let mass: f64 = g.h() * est.values.iter().sum::<f64>();
            assert!((mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_positions_give_flat_histogram() {
        let g = SpaceTimeGrid::new(1, 1.0, 8, 1.0, 1).unwrap();
        // four points per node
        let positions: Vec<f64> = g.points().iter().flat_map(|x| std::iter::repeat_n(x[0], 4)).collect();
        let e = PathEnsemble {
            d: 1,
            dt: 1.0,
            seed: 0,
            paths: positions.len(),
            jump_threshold: 1.0,
            times: vec![1.0],
            steps_at: vec![1],
            positions: vec![positions],
            jumps: vec![],
            levy_pairs: vec![],
            levy_predictions: vec![],
            aborted: 0,
        };
        let est = empirical_density(&e, 1.0, &g, Binning::Histogram).unwrap();
        for v in &est.values {
            assert!((v - est.values[0]).abs() < 1e-15);
        }
        assert!(!est.warnings.is_empty());
    }

    #[test]
    fn cauchy_jump_count_closed_form() {
        let p = params(1, 1.0, 1.0);
        let e = expected_jump_count(&p, 1.0, 1.0).unwrap();
        assert!((e - 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn levy_mass_matches_quadrature() {
        let p = params(2, 1.3, 0.7);
        let b = Ball::new(vec![2.0, 0.5], 0.4);
        let exact = levy_mass(&p, &[0.0, 0.0], &b).unwrap();
        // midpoint rule on the bounding square
        let m = 400;
        let h = 0.8 / m as f64;
        let mut approx = 0.0;
        for i in 0..m {
            for j in 0..m {
                let y = [1.6 + (i as f64 + 0.5) * h, 0.1 + (j as f64 + 0.5) * h];
                if b.contains(&y) {
                    approx += h * h * levy_density(&p, &[0.0, 0.0], &y).unwrap();
                }
            }
        }
        assert!((exact / approx - 1.0).abs() < 1e-2, "{exact} vs {approx}");
        let p1 = params(1, 1.0, 1.0);
        let m = levy_mass(&p1, &[0.0], &Ball::new(vec![3.0], 0.5)).unwrap();
        assert!((m - (1.0 / 2.5 - 1.0 / 3.5) / PI).abs() < 1e-14);
    }

    #[test]
    fn brownian_exit_oracle() {
        let p = params(1, 1.0, 1e-9);
        let rep = exit_time_stats(&p, &DriftSpec::zero(1), &[0.0], 1.0, &[0.05, 0.2], 10_000, 1e-4, 4).unwrap();
        for (k, prob, se) in rep.probabilities {
            let exact = brownian_exit_probability(1.0, k);
            // discrete monitoring misses a few exits
            assert!(prob <= exact + 3.0 * se && prob >= exact - 3.0 * se - 0.02, "κ={k}: {prob} vs {exact}");
        }
        assert_eq!(rep.kappa, Some(0.2));
    }

    #[test]
    fn vanishing_window_has_no_exits() {
        let p = params(1, 1.5, 1.0);
        let rep = exit_time_stats(&p, &DriftSpec::zero(1), &[0.0], 1.0, &[1e-4], 2_000, 1e-6, 4).unwrap();
        assert!(rep.probabilities[0].1 < 0.01);
    }
}
