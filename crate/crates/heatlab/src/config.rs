//! Run configuration: a TOML file with optional `[params]`, `[grid]`,
//! `[drift]` and `[run]` sections, overridden key by key from flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use heatkernel::drift::DriftPreset;
use heatkernel::stable_kernel::StableParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Kernel,
    Grad,
    Bounds,
    Kato,
    Series,
    Extend,
    Sde,
    Compare,
    Resolvent,
    Generator,
}

impl CommandName {
    pub fn name(self) -> &'static str {
        match self {
            Self::Kernel => "kernel",
            Self::Grad => "grad",
            Self::Bounds => "bounds",
            Self::Kato => "kato",
            Self::Series => "series",
            Self::Extend => "extend",
            Self::Sde => "sde",
            Self::Compare => "compare",
            Self::Resolvent => "resolvent",
            Self::Generator => "generator",
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<CommandName>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: ParamsFile,
    #[serde(default)]
    pub grid: GridFile,
    #[serde(default)]
    pub drift: DriftFile,
    #[serde(default)]
    pub run: RunFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub a: Option<f64>,
    #[serde(rename = "M")]
    pub cap: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(rename = "L")]
    pub half_width: Option<f64>,
    pub n: Option<usize>,
    pub times: Option<Vec<f64>>,
    pub steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftFile {
    pub preset: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub seed: Option<u64>,
    #[serde(rename = "N")]
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub tolerance: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    pub levels: Option<Vec<u32>>,
    pub l1_threshold: Option<f64>,
}

/// Flags that override single config keys.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// dimension (params.d)
    #[arg(long)]
    pub d: Option<usize>,
    /// stability index in (0, 2) (params.alpha)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// jump intensity a (params.a)
    #[arg(long)]
    pub a: Option<f64>,
    /// upper bound M on a (params.M)
    #[arg(long)]
    pub cap: Option<f64>,
    /// box half-width (grid.L)
    #[arg(long = "half-width")]
    pub half_width: Option<f64>,
    /// nodes per axis (grid.n)
    #[arg(long)]
    pub n: Option<usize>,
    /// comma-separated times (grid.times)
    #[arg(long = "t", value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// time steps of the series grid (grid.steps)
    #[arg(long)]
    pub steps: Option<usize>,
    /// drift preset, e.g. bump:amplitude=2 (drift.preset)
    #[arg(long)]
    pub drift: Option<String>,
    /// Monte Carlo paths (run.N)
    #[arg(long)]
    pub paths: Option<usize>,
    /// SDE time step (run.dt)
    #[arg(long)]
    pub dt: Option<f64>,
    /// series tolerance (run.tolerance)
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// comma-separated start point (run.x0)
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<f64>>,
    /// comma-separated resolvent parameters (run.lambdas)
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// first and last dyadic level, e.g. 3,8 (run.levels)
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<u32>>,
    /// L1 acceptance threshold for compare (run.l1_threshold)
    #[arg(long = "l1-threshold")]
    pub l1_threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Params {
    pub d: usize,
    pub alpha: f64,
    pub a: f64,
    #[serde(rename = "M")]
    pub cap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
    pub times: Vec<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Drift {
    pub preset: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Run {
    pub seed: u64,
    #[serde(rename = "N")]
    pub paths: usize,
    pub dt: f64,
    pub tolerance: f64,
    pub x0: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub levels: [u32; 2],
    pub l1_threshold: Option<f64>,
}

/// The effective configuration, echoed into every output directory.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: CommandName,
    pub params: Params,
    pub grid: Grid,
    pub drift: Drift,
    pub run: Run,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn stable(&self) -> Result<StableParams> {
        let p = &self.params;
        Ok(StableParams::new(p.d, p.alpha, p.a, p.cap)?)
    }

    pub fn t_max(&self) -> f64 {
        self.grid.times.iter().copied().fold(0.0, f64::max)
    }
}

pub fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

/// Command-line values win over file values; everything left unset takes
/// the documented default.
pub fn resolve(
    command: CommandName,
    file: FileConfig,
    set: Overrides,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<RunConfig> {
    if let Some(c) = file.command {
        if c != command {
            bail!("command: config file is for `{}`, invoked as `{}`", c.name(), command.name());
        }
    }
    let d = set.d.or(file.params.d).unwrap_or(1);
    let alpha = set.alpha.or(file.params.alpha).unwrap_or(1.5);
    let a = set.a.or(file.params.a).unwrap_or(1.0);
    let cap = set.cap.or(file.params.cap).unwrap_or(a.max(2.0));
    let times = set.times.or(file.grid.times).unwrap_or_else(|| vec![0.25]);
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let levels = set.levels.or(file.run.levels).unwrap_or_else(|| vec![3, 8]);
    let out = match out.or(file.out) {
        Some(p) => p,
        None => {
            let root = std::env::var_os("HEATLAB_OUT")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("heatlab-out"));
            root.join(command.name())
        }
    };
    let config = RunConfig {
        command,
        params: Params { d, alpha, a, cap },
        grid: Grid {
            half_width: set.half_width.or(file.grid.half_width).unwrap_or(8.0),
            // the generator check needs a fine grid to resolve first-order decay
            n: set.n.or(file.grid.n).unwrap_or(if command == CommandName::Generator { 1024 } else { 128 }),
            times,
            steps: set.steps.or(file.grid.steps).unwrap_or(16),
        },
        drift: Drift {
            preset: set.drift.or(file.drift.preset).unwrap_or_else(|| "zero".into()),
        },
        run: Run {
            seed: seed.or(file.run.seed).unwrap_or(0),
            paths: set.paths.or(file.run.paths).unwrap_or(100_000),
            dt: set.dt.or(file.run.dt).unwrap_or(t_max / 512.0),
            tolerance: set.tolerance.or(file.run.tolerance).unwrap_or(1e-8),
            x0: set.x0.or(file.run.x0).unwrap_or_else(|| vec![0.0; d]),
            lambdas: set.lambdas.or(file.run.lambdas).unwrap_or_else(|| vec![0.5, 1.0, 4.0]),
            levels: match levels.as_slice() {
                [lo, hi] => [*lo, *hi],
                _ => bail!("run.levels: expected two entries [first, last]"),
            },
            l1_threshold: set.l1_threshold.or(file.run.l1_threshold),
        },
        out,
        threads,
    };
    validate(&config)?;
    Ok(config)
}

fn validate(c: &RunConfig) -> Result<()> {
    let p = &c.params;
    if !(p.alpha > 0.0 && p.alpha < 2.0) {
        bail!("params.alpha: alpha must lie in (0,2), got {}", p.alpha);
    }
    if !(1..=3).contains(&p.d) {
        bail!("params.d: dimension must be 1, 2 or 3, got {}", p.d);
    }
    if !(p.a > 0.0 && p.a <= p.cap) {
        bail!("params.a: a must lie in (0, M] with M = {}, got {}", p.cap, p.a);
    }
    let g = &c.grid;
    if !(g.half_width > 0.0) {
        bail!("grid.L: half-width must be positive");
    }
    if g.n < 8 {
        bail!("grid.n: need at least 8 nodes per axis");
    }
    if g.times.is_empty() || g.times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        bail!("grid.times: need at least one positive time");
    }
    if g.steps == 0 {
        bail!("grid.steps: must be at least 1");
    }
    c.drift
        .preset
        .parse::<DriftPreset>()
        .and_then(|p| p.build(c.params.d))
        .map_err(|e| anyhow::anyhow!("drift.preset: {e}"))?;
    let r = &c.run;
    if r.paths == 0 {
        bail!("run.N: need at least one path");
    }
    if !(r.dt > 0.0) {
        bail!("run.dt: must be positive");
    }
    if !(r.tolerance > 0.0) {
        bail!("run.tolerance: must be positive");
    }
    if r.x0.len() != p.d {
        bail!("run.x0: expected {} coordinates, got {}", p.d, r.x0.len());
    }
    if r.lambdas.is_empty() || r.lambdas.iter().any(|l| !(*l > 0.0)) {
        bail!("run.lambdas: need positive values");
    }
    if r.levels[0] > r.levels[1] || r.levels[1] > 20 {
        bail!("run.levels: need first <= last <= 20");
    }
    if c.threads == Some(0) {
        bail!("--threads: must be at least 1");
    }
    Ok(())
}
