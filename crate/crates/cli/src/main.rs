//! `turbine-lq`: run, compare and inspect power-tracking turbine controllers.

mod output;
mod plots;
mod report;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use turbine_lq::wind::DemandSpec;
use turbine_lq::{ControllerKind, Scenario, ScenarioConfig};

use crate::output::Artifacts;

#[derive(Debug, Parser)]
#[command(name = "turbine-lq", version, about = "Wind turbine power-tracking controller simulator")]
struct Cli {
    /// Scenario file (TOML). Without it the built-in defaults are used.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Wind seed; overrides the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Seconds discarded before metrics are computed.
    #[arg(long, global = true, value_name = "SECONDS")]
    trim: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-loop run of one controller: trace, metrics and plots.
    Run {
        #[arg(long, value_enum, default_value_t = Kind::Lq)]
        controller: Kind,
    },
    /// Both controllers on identical wind, under the configured and a constant rated demand.
    Compare,
    /// Equilibria, linearizations, Riccati solutions and gains of both LQ designs.
    Design,
    /// Export the steady-state reference tables.
    Tables,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Baseline,
    Lq,
}

impl From<Kind> for ControllerKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Baseline => ControllerKind::Baseline,
            Kind::Lq => ControllerKind::Lq,
        }
    }
}

/// Prints to stdout, tolerating a closed pipe.
fn say(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trim) = cli.trim {
        cfg.sim.trim = trim;
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ScenarioConfig) -> PathBuf {
    cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn cmd_run(cfg: ScenarioConfig, kind: ControllerKind) -> Result<Artifacts> {
    let scenario = Scenario::build(cfg)?;
    let run = scenario.run(kind).with_context(|| format!("{} run", kind.name()))?;
    let trim = scenario.config.sim.trim;
    say(&report::run_summary(&run, trim));
    let mut a = Artifacts::default();
    a.add("trace.csv", run.trace.to_csv_bytes()?);
    a.add("metrics.toml", report::metrics_toml(&run)?);
    a.add("power_tracking.svg", plots::power_tracking(&[(kind.name(), &run.trace)])?);
    a.add("reference_tracking.svg", plots::reference_tracking(&run.trace)?);
    a.add("switching.svg", plots::switching(&run.trace, &scenario.config.lq.switching_mps)?);
    Ok(a)
}

fn cmd_compare(cfg: ScenarioConfig) -> Result<Artifacts> {
    let scenario = Scenario::build(cfg)?;
    let variable = scenario.compare().context("comparison under the configured demand")?;
    let rated_demand = DemandSpec::rated(scenario.config.turbine.power_rated_w);
    let rated = scenario.with_demand(rated_demand)?.compare().context("comparison under constant rated demand")?;
    let text = report::comparison(&scenario.config, &variable, &rated);
    say(&text);
    let mut a = Artifacts::default();
    a.add("comparison.md", text.into_bytes());
    a.add("trace_baseline.csv", variable.baseline.trace.to_csv_bytes()?);
    a.add("trace_lq.csv", variable.lq.trace.to_csv_bytes()?);
    a.add("power_compare.svg", plots::power_tracking(&[("baseline", &variable.baseline.trace), ("lq", &variable.lq.trace)])?);
    a.add("actuators_compare.svg", plots::actuators(&variable.baseline.trace, &variable.lq.trace)?);
    Ok(a)
}

fn cmd_design(cfg: ScenarioConfig) -> Result<Artifacts> {
    let scenario = Scenario::build(cfg)?;
    let text = report::design(&scenario);
    say(&text);
    let mut a = Artifacts::default();
    a.add("design_report.txt", text.into_bytes());
    Ok(a)
}

fn cmd_tables(cfg: ScenarioConfig) -> Result<Artifacts> {
    let scenario = Scenario::build(cfg)?;
    let t = &scenario.tables;
    let infeasible = t.infeasible.iter().filter(|&&b| b).count();
    say(&format!("{} x {} cells, {infeasible} store the maximum-power state", t.pitch.x_nodes().len(), t.pitch.y_nodes().len()));
    let mut a = Artifacts::default();
    a.add("steady_state_tables.csv", t.to_csv_string()?.into_bytes());
    Ok(a)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TURBINE_LQ_LOG", "warn")).init();
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    let out = out_dir(&cli, &cfg);
    let artifacts = match cli.command {
        Command::Run { controller } => cmd_run(cfg, controller.into())?,
        Command::Compare => cmd_compare(cfg)?,
        Command::Design => cmd_design(cfg)?,
        Command::Tables => cmd_tables(cfg)?,
    };
    artifacts.commit(&out).with_context(|| format!("writing outputs to {}", out.display()))?;
    log::info!("wrote {} files to {}", artifacts.len(), out.display());
    Ok(())
}
