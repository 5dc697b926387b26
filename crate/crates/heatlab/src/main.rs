use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

mod commands;
mod config;
mod output;

use config::{CommandName, Overrides};
use output::Output;

/// Heat-kernel experiments for Δ + a^αΔ^{α/2} + b·∇ with reproducible,
/// machine-readable outputs.
#[derive(Debug, Parser)]
#[command(name = "heatlab", version, allow_negative_numbers = true)]
struct Cli {
    command: CommandName,
    /// TOML config; flags override its keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (default: $HEATLAB_OUT/<command>)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    set: Overrides,
}

/// exit 0 when every invariant holds, 1 on a failed invariant or run
/// error, 2 on a config error
fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match cli.config.as_deref().map(config::read_file).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => return fail(2, &e),
    };
    let cfg = match config::resolve(cli.command, file, cli.set, cli.out, cli.seed, cli.threads) {
        Ok(c) => c,
        Err(e) => return fail(2, &e),
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(2, &e.into());
        }
    }
    match execute(&cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => fail(1, &e),
    }
}

fn fail(code: u8, e: &anyhow::Error) -> ExitCode {
    eprintln!("heatlab: {e:#}");
    ExitCode::from(code)
}

fn execute(cfg: &config::RunConfig) -> Result<bool> {
    let mut out = Output::create(&cfg.out)?;
    out.json("config.json", cfg)?;
    let outcome = commands::run(cfg, &mut out)?;
    let mut summary = format!("heatlab {}\n", cfg.command.name());
    for c in &outcome.checks {
        summary.push_str(&format!("{} {}: {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    let passed = outcome.checks.iter().all(|c| c.pass);
    out.json(
        "report.json",
        &serde_json::json!({
            "command": cfg.command,
            "checks": outcome.checks,
            "passed": passed,
            "report": outcome.report,
        }),
    )?;
    out.text("summary.txt", &summary)?;
    let dir = out.finish()?;
    print!("{summary}");
    println!("artifacts in {}", dir.display());
    if let Some(first) = outcome.checks.iter().find(|c| !c.pass) {
        eprintln!("heatlab: invariant failed: {}: {}", first.name, first.detail);
    }
    Ok(passed)
}
