use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use capex::scenario::{self, OutputFormat, RunReport, ScenarioConfig, SolverMode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Timing and sizing of renewable capacity under a chance constraint on emissions.
#[derive(Parser)]
#[command(name = "capex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured scenario and verify the plan.
    Solve(Common),
    /// Solve for every discount rate in `solver.rho_list` (default 0.02, 0.05, 0.08).
    Sweep(Common),
    /// Monte Carlo check of the configured or solved plan.
    Verify(Common),
    /// Standing-assumption checks only.
    Check(Common),
    /// Time-stepped path simulation of the configured or solved plan.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Root seed, overrides `quantile.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo sample count for every stage.
    #[arg(long)]
    samples: Option<usize>,
    /// Output file; stdout when absent and the config names none.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format for `solve` and `sweep`; inferred from `--out` when it ends in `.json`.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Failure carrying the process exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<capex::Error> for Failure {
    fn from(e: capex::Error) -> Self {
        // Display already includes the wrapped causes.
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 1, message: format!("{error:#}") }
    }
}

const EXIT_INFEASIBLE: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Solve(c) => solve(&c, false),
        Command::Sweep(c) => solve(&c, true),
        Command::Verify(c) => verify(&c),
        Command::Check(c) => check(&c),
        Command::Simulate(c) => simulate(&c),
    }
}

fn load(c: &Common) -> Result<ScenarioConfig, Failure> {
    let mut config = scenario::load_scenario(&c.config)?;
    config.apply_overrides(c.seed, c.samples)?;
    Ok(config)
}

fn solve(c: &Common, sweep: bool) -> Result<u8, Failure> {
    let mut config = load(c)?;
    if sweep {
        config.solver.mode = SolverMode::Sweep;
        config.solver.rho_list.get_or_insert_with(|| scenario::DEFAULT_RHO_LIST.to_vec());
    }
    let report = scenario::run_scenario(&config)?;
    log::info!("scenario {} finished in {:.3}s", config.scenario_id, report.wall_time_secs);

    let out = c.out.clone().or_else(|| config.output.path.clone());
    let format = match (c.format, &out) {
        (Some(Format::Csv), _) => OutputFormat::Csv,
        (Some(Format::Json), _) => OutputFormat::Json,
        (None, Some(p)) if p.extension().is_some_and(|e| e == "json") => OutputFormat::Json,
        (None, _) => config.output.format,
    };
    match &out {
        Some(path) => scenario::emit_report(&report, format, path)?,
        None => print_report(&report, format)?,
    }
    Ok(finish(&report))
}

fn print_report(report: &RunReport, format: OutputFormat) -> Result<(), Failure> {
    let text = match format {
        OutputFormat::Csv => scenario::rows_to_csv(&report.rows())?,
        OutputFormat::Json => scenario::report_to_json(report)? + "\n",
    };
    std::io::stdout().write_all(text.as_bytes()).context("writing report to stdout")?;
    Ok(())
}

/// Prints the infeasibility block to stderr and picks the exit status.
fn finish(report: &RunReport) -> u8 {
    match &report.infeasibility {
        None => 0,
        Some(block) => {
            let body = json!({ "infeasible": block, "z_eps": report.z_eps, "feasibility": report.feasibility });
            eprintln!("{}", serde_json::to_string_pretty(&body).expect("report values serialize"));
            EXIT_INFEASIBLE
        }
    }
}

fn write_json(value: &serde_json::Value, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).context("encoding JSON")? + "\n";
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes()).context("writing to stdout")?,
    }
    Ok(())
}

fn verify(c: &Common) -> Result<u8, Failure> {
    let config = load(c)?;
    let (plan, report) = scenario::run_verify(&config)?;
    if !report.pass {
        log::warn!(
            "estimated violation probability {} is not within tolerance of epsilon = {}",
            report.estimated_prob,
            report.target_eps
        );
    }
    write_json(&json!({ "scenario_id": config.scenario_id, "plan": plan, "verification": report }), c.out.as_deref())?;
    Ok(0)
}

fn check(c: &Common) -> Result<u8, Failure> {
    let config = load(c)?;
    let z_eps = match scenario::estimate_quantile(&config.params, &config.quantile) {
        Ok(q) => Some(q),
        Err(e) if e.exit_code() == i32::from(EXIT_INFEASIBLE) => {
            log::warn!("{e}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let report = scenario::run_feasibility(&config, z_eps.map(|q| q.z))?;
    let feasible = report.target_reachable.satisfied && report.quantile_condition.satisfied;
    write_json(
        &json!({ "scenario_id": config.scenario_id, "z_eps": z_eps, "feasibility": report, "feasible": feasible }),
        c.out.as_deref(),
    )?;
    Ok(if feasible { 0 } else { EXIT_INFEASIBLE })
}

fn simulate(c: &Common) -> Result<u8, Failure> {
    let config = load(c)?;
    let report = scenario::run_simulation(&config)?;
    write_json(&serde_json::to_value(&report).context("encoding simulation report")?, c.out.as_deref())?;
    Ok(0)
}
