use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mrdg_core::runner::{run_convergence_study, run_problem, run_projection, RunConfig};

/// Adaptive multiresolution DG solver.
#[derive(Parser)]
#[command(name = "mrdg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a config field, `key=value` (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark to its final time.
    Run(Common),
    /// Run once per threshold and report convergence rates.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Strictly decreasing refinement thresholds.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
    },
    /// Adaptive projection of the initial data only.
    Project(Common),
}

fn load(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&c.config).with_context(|| format!("reading {}", c.config.display()))?;
    for o in &c.overrides {
        cfg.apply_override(o).with_context(|| format!("applying override `{o}`"))?;
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(c) => {
            let cfg = load(&c)?;
            let s = run_problem(&cfg)?;
            println!("t={} steps={} dof_coeffs={} dof_elems={}", s.final_time, s.steps, s.dof_coeffs, s.dof_elems);
            if let Some(e) = s.errors {
                println!("l1={:e} l2={:e} linf={:e}", e.l1, e.l2, e.linf);
            }
        }
        Command::Converge { common, eps } => {
            if eps.is_empty() {
                bail!("--eps needs at least one value");
            }
            let cfg = load(&common)?;
            let rows = run_convergence_study(&cfg, &eps)?;
            print!("{}", mrdg_core::runner::convergence_csv(&rows));
        }
        Command::Project(c) => {
            let cfg = load(&c)?;
            let s = run_projection(&cfg)?;
            println!("dof_coeffs={} dof_elems={}", s.dof_coeffs, s.dof_elems);
            if let Some(e) = s.errors {
                println!("l1={:e} l2={:e} linf={:e}", e.l1, e.l2, e.linf);
            }
        }
    }
    Ok(())
}
