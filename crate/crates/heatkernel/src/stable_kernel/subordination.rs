//! Subordination representation of the free density:
//! p^a_d(t, r) = ∫_0^∞ g_d(t + a² s, r) η_t(s) ds,
//! where g_d is the Gaussian with generator Δ and η_t is the density of the
//! α/2-stable subordinator, E e^{-λS_t} = e^{-tλ^{α/2}}.
//!
//! The one-sided stable density is evaluated by Zolotarev's integral for
//! moderate arguments and by its convergent power series in x^{-β} for large
//! ones. The outer integral runs over w = ln x with the trapezoidal rule,
//! which converges geometrically for this analytic integrand.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::quad::tanh_sinh;
use crate::special::{gamma, ln_gamma};

const STEP: f64 = 0.05;
/// table reach past the series switch point, in units of w
const TABLE_EXTENT: f64 = 400.0;

/// Density of the one-sided stable law with Laplace transform e^{-λ^β}.
pub fn one_sided_stable_density(beta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.powf(-beta) <= 0.5 {
        series(beta, x)
    } else {
        zolotarev(beta, x)
    }
}

fn series(beta: f64, x: f64) -> f64 {
    let lx = x.ln();
    let mut sum = 0.0;
    for k in 1..400 {
        let kf = k as f64;
        let s = (kf * PI * beta).sin();
        let mag = (ln_gamma(kf * beta + 1.0) - ln_gamma(kf + 1.0) - (kf * beta + 1.0) * lx).exp();
        let term = if k % 2 == 1 { mag * s } else { -mag * s };
        sum += term;
        if mag < 1e-18 * sum.abs() && k > 3 {
            break;
        }
    }
    sum / PI
}

fn zolotarev(beta: f64, x: f64) -> f64 {
    let q = 1.0 / (1.0 - beta);
    let y = x.powf(-beta * q);
    let r = tanh_sinh(0.0, PI, 1e-14, |_u, da, db| {
        // u = da = π - db; sines evaluated from the nearer endpoint
        let u = if da < db { da } else { PI - db };
        let sin_u = if da < db { da.sin() } else { db.sin() };
        if sin_u <= 0.0 {
            return 0.0;
        }
        let sbu = (beta * u).sin();
        let a = (sbu / sin_u).powf(q) * ((1.0 - beta) * u).sin() / sbu;
        let ay = a * y;
        if !ay.is_finite() || ay > 745.0 {
            return 0.0;
        }
        a * (-ay).exp()
    });
    beta * q / PI * x.powf(-q) * r.value
}

/// φ(w) = η_1(e^w) e^w on a uniform grid, shared by all times and radii.
pub struct EtaTable {
    beta: f64,
    w0: f64,
    values: Vec<f64>,
    /// w at which the density switches to its series
    w_series: f64,
}

impl EtaTable {
    fn build(beta: f64) -> Self {
        let q = 1.0 / (1.0 - beta);
        let a0 = beta.powf(beta * q) * (1.0 - beta);
        // below w0 the density is below e^{-700}
        let w0 = -(((700.0 / a0).ln()) / (beta * q)).max(1.0);
        let w_series = 0.5f64.ln() / -beta;
        let n = ((w_series + TABLE_EXTENT - w0) / STEP).ceil() as usize + 1;
        let values = (0..n)
            .map(|k| {
                let w = w0 + k as f64 * STEP;
                let x = w.exp();
                one_sided_stable_density(beta, x) * x
            })
            .collect();
        Self {
            beta,
            w0,
            values,
            w_series,
        }
    }

    fn phi(&self, k: usize) -> f64 {
        if k < self.values.len() {
            self.values[k]
        } else {
            let w = self.w0 + k as f64 * STEP;
            let x = w.exp();
            series(self.beta, x) * x
        }
    }
}

pub fn eta_table(alpha: f64) -> Arc<EtaTable> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<EtaTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&alpha.to_bits()) {
        return t.clone();
    }
    let table = Arc::new(EtaTable::build(alpha / 2.0));
    cache
        .lock()
        .unwrap()
        .entry(alpha.to_bits())
        .or_insert(table)
        .clone()
}

/// (p_d(t, r), p_{d+2}(t, r)) by subordination.
pub fn radial_pair(d: usize, alpha: f64, a: f64, t: f64, r: f64) -> (f64, f64) {
    let table = eta_table(alpha);
    let beta = table.beta;
    let c = a * a * t.powf(2.0 / alpha);
    let dh = d as f64 / 2.0;
    let r2 = r * r;
    // the integrand peaks near c e^w ≈ r²; past that it decays like e^{-(β+d/2)w}
    let w_peak = if c > 0.0 { ((r2 + t) / c).ln() } else { 0.0 };
    let w_end = w_peak.max(table.w_series) + 45.0 / (beta + dh);
    let n = ((w_end - table.w0) / STEP).ceil() as usize;
    // terms with r²/4u > 700 underflow
    let k0 = if c > 0.0 && r2 / 2800.0 > t {
        let w_lo = ((r2 / 2800.0 - t) / c).ln();
        (((w_lo - table.w0) / STEP).floor().max(0.0)) as usize
    } else {
        0
    };
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let four_pi = 4.0 * PI;
    let grow = STEP.exp();
    let mut ew = (table.w0 + k0 as f64 * STEP).exp();
    for k in k0..=n {
        let phi = table.phi(k);
        let u = t + c * ew;
        ew *= grow;
        if phi == 0.0 {
            continue;
        }
        let g = (-(r2 / (4.0 * u))).exp() * inverse_half_power(d, four_pi * u);
        s0 += phi * g;
        s1 += phi * g / (four_pi * u);
    }
    (STEP * s0, STEP * s1)
}

/// x^{-d/2}
fn inverse_half_power(d: usize, x: f64) -> f64 {
    match d {
        1 => 1.0 / x.sqrt(),
        2 => 1.0 / x,
        3 => 1.0 / (x * x.sqrt()),
        4 => 1.0 / (x * x),
        _ => x.powf(-(d as f64) / 2.0),
    }
}

/// Leading tail constant of the one-sided density, η(x) ~ c x^{-1-β}.
pub fn one_sided_tail_constant(beta: f64) -> f64 {
    gamma(1.0 + beta) * (PI * beta).sin() / PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levy_case_closed_form() {
        // β = 1/2: η(x) = x^{-3/2} e^{-1/(4x)} / (2√π)
        for &x in &[0.01f64, 0.1, 0.5, 1.0, 3.0, 10.0, 200.0] {
            let e = x.powf(-1.5) * (-0.25 / x).exp() / (2.0 * PI.sqrt());
            let v = one_sided_stable_density(0.5, x);
            assert!((v / e - 1.0).abs() < 1e-11, "x={x}: {v} vs {e}");
        }
    }

    #[test]
    fn series_and_integral_agree_at_switch() {
        for &beta in &[0.25, 0.5, 0.75, 0.9] {
            let x: f64 = 0.5f64.powf(-1.0 / beta);
            let s = series(beta, x * 1.01);
            let z = zolotarev(beta, x * 1.01);
            assert!((s / z - 1.0).abs() < 1e-10, "β={beta}: {s} vs {z}");
        }
    }

    #[test]
    fn density_has_unit_mass() {
        for &alpha in &[0.5, 1.0, 1.5] {
            let table = eta_table(alpha);
            let n = table.values.len() + 2_000;
            let mass: f64 = (0..n).map(|k| table.phi(k)).sum::<f64>() * STEP;
            let w_end = table.w0 + n as f64 * STEP;
            let tail = one_sided_tail_constant(alpha / 2.0) * (-(alpha / 2.0) * w_end).exp() / (alpha / 2.0);
            assert!((mass + tail - 1.0).abs() < 1e-9, "α={alpha}: {}", mass + tail);
        }
    }
}
