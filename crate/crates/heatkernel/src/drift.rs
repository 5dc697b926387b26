//! Drift fields b on ℝ^d.
//!
//! The analytic presets all point along e₁ with a magnitude that is radial
//! about a focus point, which lets the Kato functionals and the mollifier
//! reduce to one radial and one angular integral.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::{Error, Result};

/// Radial magnitude profile F with |b(y)| = F(|y - focus|).
pub trait RadialProfile: Send + Sync + fmt::Debug {
    fn eval(&self, s: f64) -> f64;
    /// Radii where F is not smooth (always includes 0 when F is singular there).
    fn breaks(&self) -> Vec<f64>;
    /// Radius beyond which F vanishes, if any.
    fn support(&self) -> Option<f64>;
    /// F is unbounded at s = 0.
    fn singular(&self) -> bool {
        false
    }
    /// sup F when finite and known, else 0; sets absolute quadrature floors.
    fn scale(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum DriftKind {
    Zero,
    Constant { c: f64 },
    Bump { amplitude: f64, center: f64, width: f64 },
    InversePower { amplitude: f64, p: f64, cutoff: f64 },
    Sampled { lo: f64, h: f64, values: Vec<f64> },
    Mollified { base: Box<DriftKind>, n: u32 },
}

#[derive(Debug, Clone)]
pub struct DriftSpec {
    pub d: usize,
    pub kind: DriftKind,
    /// sup |b| when finite
    pub bound_hint: Option<f64>,
    profile: Option<Arc<dyn RadialProfile>>,
}

#[derive(Debug)]
struct ConstantProfile(f64);

impl RadialProfile for ConstantProfile {
    fn eval(&self, _s: f64) -> f64 {
        self.0.abs()
    }
    fn scale(&self) -> f64 {
        self.0.abs()
    }
    fn breaks(&self) -> Vec<f64> {
        vec![]
    }
    fn support(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug)]
struct BumpProfile {
    amplitude: f64,
    width: f64,
}

impl RadialProfile for BumpProfile {
    fn eval(&self, s: f64) -> f64 {
        let q = s / self.width;
        if q >= 1.0 {
            return 0.0;
        }
        self.amplitude.abs() * (1.0 - 1.0 / (1.0 - q * q)).exp()
    }
    fn scale(&self) -> f64 {
        self.amplitude.abs()
    }
    fn breaks(&self) -> Vec<f64> {
        vec![self.width]
    }
    fn support(&self) -> Option<f64> {
        Some(self.width)
    }
}

#[derive(Debug)]
struct InversePowerProfile {
    amplitude: f64,
    p: f64,
    cutoff: f64,
}

impl RadialProfile for InversePowerProfile {
    fn eval(&self, s: f64) -> f64 {
        if s >= self.cutoff {
            return 0.0;
        }
        let q = s / self.cutoff;
        let w = 1.0 - q * q;
        self.amplitude.abs() * s.powf(-self.p) * w * w
    }
    fn breaks(&self) -> Vec<f64> {
        vec![0.0, self.cutoff]
    }
    fn support(&self) -> Option<f64> {
        Some(self.cutoff)
    }
    fn singular(&self) -> bool {
        self.p > 0.0
    }
}

impl DriftSpec {
    pub fn zero(d: usize) -> Self {
        Self::from_kind(d, DriftKind::Zero).unwrap()
    }

    pub fn constant(d: usize, c: f64) -> Self {
        Self::from_kind(d, DriftKind::Constant { c }).unwrap()
    }

    pub fn bump(d: usize, amplitude: f64, center: f64, width: f64) -> Result<Self> {
        Self::from_kind(d, DriftKind::Bump { amplitude, center, width })
    }

    pub fn inverse_power(d: usize, amplitude: f64, p: f64, cutoff: f64) -> Result<Self> {
        Self::from_kind(d, DriftKind::InversePower { amplitude, p, cutoff })
    }

    /// One-dimensional field sampled on a uniform grid, linearly
    /// interpolated and zero outside.
    pub fn sampled(d: usize, lo: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        Self::from_kind(d, DriftKind::Sampled { lo, h, values })
    }

    pub(crate) fn with_profile(d: usize, kind: DriftKind, profile: Arc<dyn RadialProfile>, bound: Option<f64>) -> Self {
        Self {
            d,
            kind,
            bound_hint: bound,
            profile: Some(profile),
        }
    }

    pub fn from_kind(d: usize, kind: DriftKind) -> Result<Self> {
        if d < 1 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        let (profile, bound): (Option<Arc<dyn RadialProfile>>, Option<f64>) = match &kind {
            DriftKind::Zero => (Some(Arc::new(ConstantProfile(0.0))), Some(0.0)),
            DriftKind::Constant { c } => (Some(Arc::new(ConstantProfile(*c))), Some(c.abs())),
            DriftKind::Bump { amplitude, width, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::Domain("bump width must be positive".into()));
                }
                (
                    Some(Arc::new(BumpProfile {
                        amplitude: *amplitude,
                        width: *width,
                    })),
                    Some(amplitude.abs()),
                )
            }
            DriftKind::InversePower { amplitude, p, cutoff } => {
                if !(*cutoff > 0.0) {
                    return Err(Error::Domain("inverse-power cutoff must be positive".into()));
                }
                if !(*p >= 0.0 && *p < d as f64) {
                    return Err(Error::Domain("inverse-power exponent must lie in [0, d)".into()));
                }
                let bound = if *p == 0.0 { Some(amplitude.abs()) } else { None };
                (
                    Some(Arc::new(InversePowerProfile {
                        amplitude: *amplitude,
                        p: *p,
                        cutoff: *cutoff,
                    })),
                    bound,
                )
            }
            DriftKind::Sampled { h, values, .. } => {
                if d != 1 {
                    return Err(Error::Unsupported("sampled drifts are one-dimensional".into()));
                }
                if !(*h > 0.0) || values.len() < 2 {
                    return Err(Error::Domain("sampled drift needs h > 0 and at least two values".into()));
                }
                (None, Some(values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))))
            }
            DriftKind::Mollified { .. } => {
                return Err(Error::Unsupported("mollified fields are built by kato::mollify".into()));
            }
        };
        if d == 1 && bound.is_none() {
            return Err(Error::Domain("drift must be bounded in dimension 1".into()));
        }
        Ok(Self {
            d,
            kind,
            bound_hint: bound,
            profile,
        })
    }

    /// Radial magnitude profile and its focus along e₁, for radial presets.
    pub fn radial(&self) -> Option<(f64, Arc<dyn RadialProfile>)> {
        let p = self.profile.clone()?;
        Some((self.focus(), p))
    }

    /// First coordinate of the point about which |b| is radial.
    pub fn focus(&self) -> f64 {
        focus_of(&self.kind)
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            DriftKind::Zero => true,
            DriftKind::Constant { c } => *c == 0.0,
            DriftKind::Bump { amplitude, .. } | DriftKind::InversePower { amplitude, .. } => *amplitude == 0.0,
            DriftKind::Sampled { values, .. } => values.iter().all(|&v| v == 0.0),
            DriftKind::Mollified { .. } => self.bound_hint == Some(0.0),
        }
    }

    /// Signed e₁ amplitude sign of the field.
    fn sign(&self) -> f64 {
        sign_of(&self.kind)
    }

    /// First component of b(x); the others vanish for every preset.
    pub fn first_component(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DriftKind::Zero => 0.0,
            DriftKind::Constant { c } => *c,
            DriftKind::Sampled { lo, h, values } => {
                let u = (x[0] - lo) / h;
                if u < 0.0 || u > (values.len() - 1) as f64 {
                    return 0.0;
                }
                let i = (u.floor() as usize).min(values.len() - 2);
                let f = u - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
            _ => {
                let p = self.profile.as_ref().unwrap();
                let fc = self.focus();
                let s = x
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| if k == 0 { (v - fc) * (v - fc) } else { v * v })
                    .sum::<f64>()
                    .sqrt();
                self.sign() * p.eval(s)
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        v[0] = self.first_component(x);
        v
    }

    /// |b(x)|
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        self.first_component(x).abs()
    }

    /// First component with |b| capped at `cap`.
    pub fn first_component_capped(&self, x: &[f64], cap: f64) -> f64 {
        self.first_component(x).clamp(-cap, cap)
    }

    /// Points at which the field is singular or centred (first coordinate only).
    pub fn singular_points(&self) -> Vec<f64> {
        match &self.kind {
            DriftKind::Zero | DriftKind::Constant { .. } => vec![0.0],
            DriftKind::Sampled { lo, h, values } => {
                let (i, _) = values
                    .iter()
                    .enumerate()
                    .fold((0, 0.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
                vec![lo + i as f64 * h]
            }
            _ => vec![self.focus()],
        }
    }

    /// Half-width of a box (centred at the focus) containing the support.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            DriftKind::Sampled { lo, h, values } => {
                let hi = lo + h * (values.len() - 1) as f64;
                Some(lo.abs().max(hi.abs()))
            }
            _ => self.profile.as_ref().and_then(|p| p.support()),
        }
    }

    /// Same field multiplied by c.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let kind = scale_kind(&self.kind, c)?;
        match &self.kind {
            DriftKind::Mollified { .. } => Err(Error::Unsupported("scale the base field before mollifying".into())),
            _ => Self::from_kind(self.d, kind),
        }
    }
}

fn focus_of(kind: &DriftKind) -> f64 {
    match kind {
        DriftKind::Bump { center, .. } => *center,
        DriftKind::Mollified { base, .. } => focus_of(base),
        _ => 0.0,
    }
}

fn sign_of(kind: &DriftKind) -> f64 {
    match kind {
        DriftKind::Constant { c } => c.signum(),
        DriftKind::Bump { amplitude, .. } | DriftKind::InversePower { amplitude, .. } => amplitude.signum(),
        DriftKind::Mollified { base, .. } => sign_of(base),
        _ => 1.0,
    }
}

fn scale_kind(kind: &DriftKind, c: f64) -> Result<DriftKind> {
    Ok(match kind {
        DriftKind::Zero => DriftKind::Zero,
        DriftKind::Constant { c: v } => DriftKind::Constant { c: v * c },
        DriftKind::Bump { amplitude, center, width } => DriftKind::Bump {
            amplitude: amplitude * c,
            center: *center,
            width: *width,
        },
        DriftKind::InversePower { amplitude, p, cutoff } => DriftKind::InversePower {
            amplitude: amplitude * c,
            p: *p,
            cutoff: *cutoff,
        },
        DriftKind::Sampled { lo, h, values } => DriftKind::Sampled {
            lo: *lo,
            h: *h,
            values: values.iter().map(|v| v * c).collect(),
        },
        DriftKind::Mollified { .. } => return Err(Error::Unsupported("cannot rescale a mollified field".into())),
    })
}

/// Preset identifier parsed from strings such as `bump:amplitude=2,center=0,width=1`,
/// `invpow:p=0.5,cutoff=1`, `constant:c=0.5` or `zero`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftPreset {
    pub id: String,
    pub kind_name: String,
    pub values: Vec<(String, f64)>,
}

impl FromStr for DriftPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), r.trim()),
            None => (s, ""),
        };
        let mut values = Vec::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Domain(format!("drift parameter `{part}` is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("drift parameter `{k}` is not a number")))?;
            values.push((k.trim().to_string(), v));
        }
        let allowed: &[&str] = match name {
            "zero" => &[],
            "constant" => &["c"],
            "bump" => &["amplitude", "center", "width"],
            "invpow" => &["amplitude", "p", "cutoff"],
            _ => return Err(Error::Domain(format!("unknown drift preset `{name}`"))),
        };
        for (k, _) in &values {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Domain(format!("unknown parameter `{k}` for drift preset `{name}`")));
            }
        }
        Ok(Self {
            id: s.to_string(),
            kind_name: name.to_string(),
            values,
        })
    }
}

impl DriftPreset {
    fn get(&self, key: &str, default: f64) -> f64 {
        self.values
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .unwrap_or(default)
    }

    pub fn build(&self, d: usize) -> Result<DriftSpec> {
        match self.kind_name.as_str() {
            "zero" => Ok(DriftSpec::zero(d)),
            "constant" => Ok(DriftSpec::constant(d, self.get("c", 1.0))),
            "bump" => DriftSpec::bump(d, self.get("amplitude", 1.0), self.get("center", 0.0), self.get("width", 1.0)),
            "invpow" => DriftSpec::inverse_power(d, self.get("amplitude", 1.0), self.get("p", 0.5), self.get("cutoff", 1.0)),
            other => Err(Error::Domain(format!("unknown drift preset `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_presets() {
        let p: DriftPreset = "bump:amplitude=2,center=0.5".parse().unwrap();
        let b = p.build(1).unwrap();
        assert_eq!(b.first_component(&[0.5]), 2.0);
        assert_eq!(b.first_component(&[1.6]), 0.0);
        let q: DriftPreset = "invpow:p=0.5,cutoff=1".parse().unwrap();
        let f = q.build(2).unwrap();
        assert!((f.magnitude(&[0.25, 0.0]) - 2.0 * (1.0 - 0.0625f64).powi(2)).abs() < 1e-14);
        assert!("bump:height=1".parse::<DriftPreset>().is_err());
        assert!("spiral".parse::<DriftPreset>().is_err());
    }

    #[test]
    fn one_dimensional_fields_must_be_bounded() {
        assert!(DriftSpec::inverse_power(1, 1.0, 0.5, 1.0).is_err());
        assert!(DriftSpec::inverse_power(2, 1.0, 0.5, 1.0).is_ok());
    }

    #[test]
    fn sampled_interpolates() {
        let b = DriftSpec::sampled(1, -1.0, 0.5, vec![0.0, 1.0, 3.0, 1.0, 0.0]).unwrap();
        assert_eq!(b.first_component(&[-0.25]), 2.0);
        assert_eq!(b.first_component(&[5.0]), 0.0);
        assert_eq!(b.bound_hint, Some(3.0));
    }

    #[test]
    fn scaling_is_linear() {
        let b = DriftSpec::bump(2, 1.5, 0.0, 1.0).unwrap();
        let c = b.scaled(-2.0).unwrap();
        let x = [0.3, -0.2];
        assert!((c.first_component(&x) + 2.0 * b.first_component(&x)).abs() < 1e-15);
    }
}
