//! Configuration-driven pipeline: quantile, feasibility checks, analytic
//! solve, grid verification and Monte Carlo constraint check, plus report
//! emission.
//!
//! Scenario files are TOML. Every seeded stage derives its stream from the
//! single `quantile.seed`, so a file fully determines its CSV output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analytic::{self, single_intervention_cost, Solution};
use crate::energy::{simulate_path_totals, PathSummary};
use crate::error::{Error, Result, StageExt};
use crate::feasibility::{self, CheckResult};
use crate::numeric::{self, GridSpec, VerificationReport};
use crate::plan::{CapacityPlan, ScenarioParams};
use crate::stochastic::{constraint_samples, upper_quantile_mc, z_epsilon_oracle, QuantileMethod, QuantileResult, RandomVariable};

pub const DEFAULT_SAMPLES: usize = 1_000_000;
/// Used by the `sweep` command when the file has no `solver.rho_list`.
pub const DEFAULT_RHO_LIST: [f64; 3] = [0.02, 0.05, 0.08];

pub const CSV_COLUMNS: [&str; 15] = [
    "scenario_id",
    "rho",
    "T",
    "L",
    "epsilon",
    "xi_M",
    "z_eps",
    "regime",
    "t_hat",
    "xi_hat",
    "cost_analytic",
    "cost_numeric",
    "prob_estimate",
    "prob_stderr",
    "feasible",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    One,
    Two,
    N,
    TotalCapacity,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileConfig {
    pub method: QuantileMethod,
    pub n_samples: usize,
    /// Root seed for every stochastic stage of the run.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mode: SolverMode,
    pub n: Option<usize>,
    pub xi_tot: Option<f64>,
    pub rho_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityConfig {
    pub margin: f64,
    pub tol_dv: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub n_samples: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub dt: f64,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub format: OutputFormat,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub params: ScenarioParams,
    pub quantile: QuantileConfig,
    pub solver: SolverConfig,
    pub grid: GridSpec,
    pub feasibility: FeasibilityConfig,
    pub verify: VerifyConfig,
    pub simulate: SimulateConfig,
    /// Explicit plan for `verify` and `simulate`; solved when absent.
    pub plan: Option<CapacityPlan>,
    pub output: OutputConfig,
}

mod raw {
    use super::*;

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct File {
        pub scenario_id: Option<String>,
        pub params: Params,
        #[serde(default)]
        pub quantile: Quantile,
        #[serde(default)]
        pub solver: Solver,
        #[serde(default)]
        pub grid: Grid,
        #[serde(default)]
        pub feasibility: Feasibility,
        #[serde(default)]
        pub verify: Verify,
        #[serde(default)]
        pub simulate: Simulate,
        pub plan: Option<Plan>,
        #[serde(default)]
        pub output: Output,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Params {
        pub horizon: f64,
        pub rho: Option<f64>,
        pub kappa: f64,
        #[serde(default)]
        pub fixed_cost: f64,
        pub e_f: f64,
        #[serde(default)]
        pub e_i: f64,
        pub fossil_capacity: Option<f64>,
        pub target: f64,
        pub epsilon: f64,
        pub xi_max: f64,
        pub demand: RandomVariable,
        pub capacity_factor: RandomVariable,
    }

    #[derive(Deserialize, Default)]
    #[serde(deny_unknown_fields)]
    pub struct Quantile {
        pub method: Option<QuantileMethod>,
        pub n_samples: Option<usize>,
        pub seed: Option<u64>,
    }

    #[derive(Deserialize, Default)]
    #[serde(deny_unknown_fields)]
    pub struct Solver {
        pub mode: Option<SolverMode>,
        pub n: Option<usize>,
        pub xi_tot: Option<f64>,
        pub rho_list: Option<Vec<f64>>,
    }

    #[derive(Deserialize, Default)]
    #[serde(deny_unknown_fields)]
    pub struct Grid {
        pub t_points: Option<usize>,
        pub xi_points: Option<usize>,
    }

    #[derive(Deserialize, Default)]
    #[serde(deny_unknown_fields)]
    pub struct Feasibility {
        pub margin: Option<f64>,
        pub tol_dv: Option<f64>,
        pub n_samples: Option<usize>,
    }

    #[derive(Deserialize, Default)]
    #[serde(deny_unknown_fields)]
    pub struct Verify {
        pub n_samples: Option<usize>,
        pub tol: Option<f64>,
    }

    #[derive(Deserialize, Default)]
    #[serde(deny_unknown_fields)]
    pub struct Simulate {
        pub dt: Option<f64>,
        pub paths: Option<usize>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Plan {
        #[serde(default)]
        pub initial_capacity: f64,
        /// `[time, size]` pairs.
        pub interventions: Vec<[f64; 2]>,
    }

    #[derive(Deserialize, Default)]
    #[serde(deny_unknown_fields)]
    pub struct Output {
        pub format: Option<OutputFormat>,
        pub path: Option<PathBuf>,
    }
}

/// Reads and validates a scenario file. The scenario id defaults to the file stem.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read scenario file {}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_scenario(&text, stem).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses scenario TOML, applying defaults and validating.
pub fn parse_scenario(text: &str, default_id: &str) -> Result<ScenarioConfig> {
    let file: raw::File = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
    let mode = file.solver.mode.unwrap_or(SolverMode::One);
    let rho = match (file.params.rho, mode, &file.solver.rho_list) {
        (Some(rho), _, _) => rho,
        (None, SolverMode::Sweep, Some(list)) if !list.is_empty() => list[0],
        (None, SolverMode::Sweep, _) => 0.0,
        (None, _, _) => return Err(Error::config("params.rho is required unless solver.mode = \"sweep\"")),
    };
    let p = file.params;
    let fossil_capacity = p.fossil_capacity.unwrap_or_else(|| p.demand.support().1);
    let params = ScenarioParams {
        horizon: p.horizon,
        rho,
        kappa: p.kappa,
        fixed_cost: p.fixed_cost,
        e_f: p.e_f,
        e_i: p.e_i,
        fossil_capacity,
        target: p.target,
        epsilon: p.epsilon,
        xi_max: p.xi_max,
        demand: p.demand,
        capacity_factor: p.capacity_factor,
    };
    let n_samples = file.quantile.n_samples.unwrap_or(DEFAULT_SAMPLES);
    let default_grid = GridSpec::default();
    let plan = match file.plan {
        Some(pl) => {
            let pairs: Vec<(f64, f64)> = pl.interventions.iter().map(|&[t, xi]| (t, xi)).collect();
            Some(CapacityPlan::new(pl.initial_capacity, &pairs).map_err(|e| Error::config(format!("plan: {e}")))?)
        }
        None => None,
    };
    let config = ScenarioConfig {
        scenario_id: file.scenario_id.unwrap_or_else(|| default_id.to_string()),
        params,
        quantile: QuantileConfig {
            method: file.quantile.method.unwrap_or(QuantileMethod::MonteCarlo),
            n_samples,
            seed: file.quantile.seed.unwrap_or(0),
        },
        solver: SolverConfig { mode, n: file.solver.n, xi_tot: file.solver.xi_tot, rho_list: file.solver.rho_list },
        grid: GridSpec {
            t_points: file.grid.t_points.unwrap_or(default_grid.t_points),
            xi_points: file.grid.xi_points.unwrap_or(default_grid.xi_points),
        },
        feasibility: FeasibilityConfig {
            margin: file.feasibility.margin.unwrap_or(feasibility::DEFAULT_MARGIN),
            tol_dv: file.feasibility.tol_dv.unwrap_or(feasibility::DEFAULT_TOL_DV),
            n_samples: file.feasibility.n_samples.unwrap_or(n_samples),
        },
        verify: VerifyConfig { n_samples: file.verify.n_samples.unwrap_or(n_samples), tol: file.verify.tol.unwrap_or(0.0) },
        simulate: SimulateConfig { dt: file.simulate.dt.unwrap_or(0.01), paths: file.simulate.paths.unwrap_or(1000) },
        plan,
        output: OutputConfig { format: file.output.format.unwrap_or(OutputFormat::Csv), path: file.output.path },
    };
    config.validate()?;
    Ok(config)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if let Err(e) = self.params.validate() {
            return bad(format!("params: {}", e.root()));
        }
        if let Err(e) = self.grid.validate() {
            return bad(e.root().to_string());
        }
        if self.quantile.n_samples == 0 || self.feasibility.n_samples == 0 || self.verify.n_samples == 0 {
            return bad("sample counts must be positive".into());
        }
        if !(self.feasibility.margin > 0.0) || !(self.feasibility.tol_dv >= 0.0) || !(self.verify.tol >= 0.0) {
            return bad("feasibility.margin must be positive, tol_dv and verify.tol nonnegative".into());
        }
        if !(self.simulate.dt > 0.0) || self.simulate.paths == 0 {
            return bad("simulate.dt and simulate.paths must be positive".into());
        }
        match self.solver.mode {
            SolverMode::N => match self.solver.n {
                Some(n) if (1..=4).contains(&n) => {}
                Some(n) => return bad(format!("solver.n must be between 1 and 4, got {n}")),
                None => return bad("solver.mode = \"n\" requires solver.n".into()),
            },
            SolverMode::TotalCapacity => match self.solver.xi_tot {
                Some(x) if x > 0.0 && x.is_finite() => {}
                Some(x) => return bad(format!("solver.xi_tot must be positive, got {x}")),
                None => return bad("solver.mode = \"total_capacity\" requires solver.xi_tot".into()),
            },
            SolverMode::Sweep => match &self.solver.rho_list {
                Some(list) if !list.is_empty() => {}
                _ => return bad("solver.mode = \"sweep\" requires a non-empty solver.rho_list".into()),
            },
            SolverMode::One | SolverMode::Two => {}
        }
        if let Some(list) = &self.solver.rho_list {
            if list.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return bad("solver.rho_list entries must be nonnegative".into());
            }
        }
        if let Some(plan) = &self.plan {
            if let Err(e) = plan.validate_horizon(self.params.horizon) {
                return bad(format!("plan: {}", e.root()));
            }
        }
        Ok(())
    }

    /// Command-line overrides: `seed` replaces the root seed, `samples` every
    /// Monte Carlo sample count.
    pub fn apply_overrides(&mut self, seed: Option<u64>, samples: Option<usize>) -> Result<()> {
        if let Some(seed) = seed {
            self.quantile.seed = seed;
        }
        if let Some(n) = samples {
            self.quantile.n_samples = n;
            self.feasibility.n_samples = n;
            self.verify.n_samples = n;
        }
        self.validate()
    }

    fn dv_interventions(&self) -> usize {
        match self.solver.mode {
            SolverMode::One | SolverMode::Sweep => 1,
            SolverMode::Two | SolverMode::TotalCapacity => 2,
            SolverMode::N => self.solver.n.unwrap_or(1),
        }
    }
}

/// `z_ε` by the configured method.
pub fn estimate_quantile(params: &ScenarioParams, q: &QuantileConfig) -> Result<QuantileResult> {
    match q.method {
        QuantileMethod::MonteCarlo => {
            let samples = constraint_samples(
                &params.demand,
                &params.capacity_factor,
                params.horizon,
                params.target,
                params.e_f,
                q.seed,
                q.n_samples,
            )?;
            upper_quantile_mc(&samples, params.epsilon)
        }
        QuantileMethod::QuadratureOracle => z_epsilon_oracle(
            &params.demand,
            &params.capacity_factor,
            params.horizon,
            params.target,
            params.e_f,
            params.epsilon,
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileCheck {
    pub z_per_year: Option<f64>,
    pub xi_max: f64,
    pub satisfied: bool,
}

/// Every standing assumption with its computed probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `P(e_F·T·min(D, C_F) ≥ L)` against `margin·ε`.
    pub target_reachable: CheckResult,
    /// `P(e_F·T·D > L)` against `margin·ε`.
    pub do_nothing_violation: CheckResult,
    /// `P(D < N·ξ_M·V)` against `tol_dv`.
    pub dv_condition: CheckResult,
    pub dv_interventions: usize,
    /// `0 < z_ε/T ≤ ξ_M`.
    pub quantile_condition: QuantileCheck,
}

pub fn run_feasibility(config: &ScenarioConfig, z_eps: Option<f64>) -> Result<FeasibilityReport> {
    let p = &config.params;
    let f = &config.feasibility;
    let seed = config.quantile.seed;
    let n_dv = config.dv_interventions();
    let quantile_condition = QuantileCheck {
        z_per_year: z_eps.map(|z| z / p.horizon),
        xi_max: p.xi_max,
        satisfied: z_eps.is_some_and(|z| feasibility::check_quantile_condition(z, p.horizon, p.xi_max)),
    };
    Ok(FeasibilityReport {
        target_reachable: feasibility::check_target_reachable_with(p, f.n_samples, seed, f.margin)?,
        do_nothing_violation: feasibility::check_do_nothing_violation(p, f.n_samples, seed, f.margin)?,
        dv_condition: feasibility::check_dv_condition_with(p, n_dv, f.n_samples, seed, f.tol_dv)?,
        dv_interventions: n_dv,
        quantile_condition,
    })
}

/// Machine-readable reason a scenario has no admissible plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infeasibility {
    pub stage: String,
    pub condition: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub analytic: Solution,
    pub numeric: Solution,
    pub verification: VerificationReport,
}

/// `κ·(z_ε/(T − t))·e^{−ρt}` on the t-grid; `within_cap` marks `ξ(t) ≤ ξ_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub rho: f64,
    pub t: Vec<f64>,
    pub cost: Vec<f64>,
    pub within_cap: Vec<bool>,
}

impl CostCurve {
    pub fn new(z_eps: f64, params: &ScenarioParams, grid: &GridSpec) -> Self {
        let t = grid.times(params.horizon, &[]);
        let cost = t.iter().map(|&t| single_intervention_cost(z_eps, t, params)).collect();
        let within_cap = t.iter().map(|&t| z_eps / (params.horizon - t) <= params.xi_max).collect();
        CostCurve { rho: params.rho, t, cost, within_cap }
    }

    /// Grid point of least cost among those within the cap.
    pub fn argmin(&self) -> Option<(f64, f64)> {
        self.t
            .iter()
            .zip(&self.cost)
            .zip(&self.within_cap)
            .filter(|(_, &ok)| ok)
            .map(|((&t, &c), _)| (t, c))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub curves: Vec<CostCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub z_eps: Option<QuantileResult>,
    pub feasibility: FeasibilityReport,
    pub analytic: Option<Solution>,
    pub numeric: Option<Solution>,
    pub verification: Option<VerificationReport>,
    pub sweep: Option<SweepTable>,
    pub infeasibility: Option<Infeasibility>,
    pub wall_time_secs: f64,
}

impl RunReport {
    pub fn is_feasible(&self) -> bool {
        self.infeasibility.is_none()
    }
}

/// Runs the full pipeline. Infeasible scenarios produce a report with an
/// [`Infeasibility`] block rather than an error.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    let started = Instant::now();
    config.validate()?;
    let params = &config.params;
    let mut infeasibility = None;

    let z_eps = match estimate_quantile(params, &config.quantile) {
        Ok(q) => Some(q),
        Err(e @ Error::Infeasible(_)) => {
            infeasibility = Some(Infeasibility {
                stage: "quantile".into(),
                condition: "quantile".into(),
                detail: e.to_string(),
            });
            None
        }
        Err(e) => return Err(e.at_stage("quantile")),
    };
    let z = z_eps.map(|q| q.z);
    let feas = run_feasibility(config, z).stage("feasibility")?;

    if infeasibility.is_none() && !feas.target_reachable.satisfied {
        infeasibility = Some(Infeasibility {
            stage: "feasibility".into(),
            condition: "target_reachable".into(),
            detail: format!(
                "P(e_F*T*min(D, C_F) >= L) = {} is below {} * epsilon: the emission target L = {} is set too high for the chance constraint to bind",
                feas.target_reachable.prob, config.feasibility.margin, params.target
            ),
        });
    }
    if infeasibility.is_none() && !feas.quantile_condition.satisfied {
        let z = z.expect("quantile present when no earlier infeasibility");
        let detail = if z <= 0.0 {
            format!("z_eps = {z} is not positive: the constraint holds without new capacity, so (L, epsilon) does not bind")
        } else {
            format!(
                "z_eps/T = {} exceeds xi_M = {}: no admissible plan meets P(E(T) > L) = epsilon; the pair (L, epsilon) is unrealistic for this capacity cap",
                z / params.horizon,
                params.xi_max
            )
        };
        infeasibility = Some(Infeasibility { stage: "feasibility".into(), condition: "quantile".into(), detail });
    }

    let mut report = RunReport {
        config: config.clone(),
        z_eps,
        feasibility: feas,
        analytic: None,
        numeric: None,
        verification: None,
        sweep: None,
        infeasibility,
        wall_time_secs: 0.0,
    };
    if report.infeasibility.is_some() {
        report.wall_time_secs = started.elapsed().as_secs_f64();
        return Ok(report);
    }
    let z = z.expect("quantile present for feasible scenarios");

    if config.solver.mode == SolverMode::Sweep {
        let rhos = config.solver.rho_list.clone().unwrap_or_else(|| DEFAULT_RHO_LIST.to_vec());
        report.sweep = Some(sweep_with(config, z, &rhos)?);
    } else {
        match solve_pair(config, z) {
            Ok((analytic, numeric)) => {
                let verification = numeric::verify_constraint_with(
                    &analytic.plan,
                    params,
                    config.verify.n_samples,
                    config.quantile.seed,
                    config.verify.tol,
                )
                .stage("verify")?;
                report.analytic = Some(analytic);
                report.numeric = Some(numeric);
                report.verification = Some(verification);
            }
            Err(e) if matches!(e.root(), Error::Infeasible(_)) => {
                let stage = match &e {
                    Error::Stage { stage, .. } => stage.to_string(),
                    _ => "solve".into(),
                };
                report.infeasibility = Some(Infeasibility { stage, condition: "solver".into(), detail: e.root().to_string() });
            }
            Err(e) => return Err(e),
        }
    }
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

fn solve_pair(config: &ScenarioConfig, z: f64) -> Result<(Solution, Solution)> {
    let p = &config.params;
    let g = &config.grid;
    let (a, n) = match config.solver.mode {
        SolverMode::One | SolverMode::Sweep => {
            (analytic::solve_one_intervention(z, p).stage("analytic")?, numeric::grid_search_one(z, p, g).stage("numeric")?)
        }
        SolverMode::Two => {
            (analytic::solve_two_interventions(z, p).stage("analytic")?, numeric::grid_search_two(z, p, g).stage("numeric")?)
        }
        SolverMode::N => {
            let n = config.solver.n.unwrap_or(1);
            (
                analytic::solve_n_interventions(z, n, p).stage("analytic")?,
                numeric::grid_search_n(z, n, p, g).stage("numeric")?,
            )
        }
        SolverMode::TotalCapacity => {
            let x = config.solver.xi_tot.unwrap_or(p.xi_max);
            (
                analytic::solve_total_capacity(z, x, p).stage("analytic")?,
                numeric::grid_search_total_capacity(z, x, p, g).stage("numeric")?,
            )
        }
    };
    Ok((a, n))
}

/// One single-intervention row per ρ in `solver.rho_list` (or the default
/// list), with cost curves. Fails with an infeasibility error when `z_ε`
/// violates the quantile condition.
pub fn sweep_rho(config: &ScenarioConfig) -> Result<SweepTable> {
    let z = estimate_quantile(&config.params, &config.quantile).stage("quantile")?.z;
    let rhos = config.solver.rho_list.clone().unwrap_or_else(|| DEFAULT_RHO_LIST.to_vec());
    sweep_with(config, z, &rhos)
}

fn sweep_with(config: &ScenarioConfig, z: f64, rhos: &[f64]) -> Result<SweepTable> {
    let mut table = SweepTable::default();
    for &rho in rhos {
        let p = config.params.with_rho(rho);
        let analytic = analytic::solve_one_intervention(z, &p).stage("analytic")?;
        let numeric = numeric::grid_search_one(z, &p, &config.grid).stage("numeric")?;
        let verification =
            numeric::verify_constraint_with(&analytic.plan, &p, config.verify.n_samples, config.quantile.seed, config.verify.tol)
                .stage("verify")?;
        table.curves.push(CostCurve::new(z, &p, &config.grid));
        table.rows.push(SweepRow { rho, analytic, numeric, verification });
    }
    Ok(table)
}

/// One line of the CSV report. Empty cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario_id: String,
    pub rho: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "L")]
    pub target: f64,
    pub epsilon: f64,
    #[serde(rename = "xi_M")]
    pub xi_max: f64,
    pub z_eps: Option<f64>,
    pub regime: String,
    pub t_hat: Option<f64>,
    pub xi_hat: Option<f64>,
    pub cost_analytic: Option<f64>,
    pub cost_numeric: Option<f64>,
    pub prob_estimate: Option<f64>,
    pub prob_stderr: Option<f64>,
    pub feasible: bool,
}

impl ReportRow {
    fn base(config: &ScenarioConfig, rho: f64, z_eps: Option<f64>) -> Self {
        let p = &config.params;
        ReportRow {
            scenario_id: config.scenario_id.clone(),
            rho,
            horizon: p.horizon,
            target: p.target,
            epsilon: p.epsilon,
            xi_max: p.xi_max,
            z_eps,
            regime: "infeasible".into(),
            t_hat: None,
            xi_hat: None,
            cost_analytic: None,
            cost_numeric: None,
            prob_estimate: None,
            prob_stderr: None,
            feasible: false,
        }
    }

    fn solved(mut self, analytic: &Solution, numeric: &Solution, v: &VerificationReport) -> Self {
        self.regime = analytic.regime.to_string();
        self.t_hat = Some(analytic.time());
        self.xi_hat = Some(analytic.size());
        self.cost_analytic = Some(analytic.cost);
        self.cost_numeric = Some(numeric.cost);
        self.prob_estimate = Some(v.estimated_prob);
        self.prob_stderr = Some(v.std_error);
        self.feasible = analytic.feasible;
        self
    }

    fn cells(&self) -> [String; 15] {
        let num = |x: Option<f64>| x.map(|x| x.to_string()).unwrap_or_default();
        [
            self.scenario_id.clone(),
            self.rho.to_string(),
            self.horizon.to_string(),
            self.target.to_string(),
            self.epsilon.to_string(),
            self.xi_max.to_string(),
            num(self.z_eps),
            self.regime.clone(),
            num(self.t_hat),
            num(self.xi_hat),
            num(self.cost_analytic),
            num(self.cost_numeric),
            num(self.prob_estimate),
            num(self.prob_stderr),
            self.feasible.to_string(),
        ]
    }
}

impl RunReport {
    /// CSV rows: one per ρ in sweep mode, otherwise one.
    pub fn rows(&self) -> Vec<ReportRow> {
        let z = self.z_eps.map(|q| q.z);
        let config = &self.config;
        if let Some(sweep) = &self.sweep {
            return sweep
                .rows
                .iter()
                .map(|r| ReportRow::base(config, r.rho, z).solved(&r.analytic, &r.numeric, &r.verification))
                .collect();
        }
        let base = ReportRow::base(config, config.params.rho, z);
        match (&self.analytic, &self.numeric, &self.verification) {
            (Some(a), Some(n), Some(v)) => vec![base.solved(a, n, v)],
            _ => vec![base],
        }
    }
}

/// CSV text with the documented header; floats use the shortest decimal
/// that parses back to the same value.
pub fn rows_to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::input(format!("CSV encoding: {e}"));
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.cells()).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::input(format!("CSV encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 cells is UTF-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<ReportRow>, _>>()
        .map_err(|e| Error::input(format!("CSV decoding: {e}")))
}

/// Long-format cost curves: `rho,t,cost,within_cap`.
pub fn curves_to_csv(curves: &[CostCurve]) -> String {
    let mut out = String::from("rho,t,cost,within_cap\n");
    for c in curves {
        for ((t, cost), ok) in c.t.iter().zip(&c.cost).zip(&c.within_cap) {
            let _ = writeln!(out, "{},{t},{cost},{ok}", c.rho);
        }
    }
    out
}

pub fn report_to_json(report: &RunReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::input(format!("JSON encoding: {e}")))
}

/// Writes the report. CSV output also writes the sweep's cost curves next
/// to it as `<stem>.curves.csv`.
pub fn emit_report(report: &RunReport, format: OutputFormat, path: &Path) -> Result<()> {
    let write = |p: &Path, text: &str| std::fs::write(p, text).map_err(|e| Error::io(p, e));
    match format {
        OutputFormat::Json => write(path, &report_to_json(report)?),
        OutputFormat::Csv => {
            write(path, &rows_to_csv(&report.rows())?)?;
            if let Some(sweep) = &report.sweep {
                write(&curves_path(path), &curves_to_csv(&sweep.curves))?;
            }
            Ok(())
        }
    }
}

pub fn curves_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}.curves.csv"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub scenario_id: String,
    pub plan: CapacityPlan,
    pub summary: PathSummary,
    pub target: f64,
    pub epsilon: f64,
}

/// The plan to verify or simulate: the configured one, else the analytic solution.
pub fn resolve_plan(config: &ScenarioConfig) -> Result<CapacityPlan> {
    if let Some(plan) = &config.plan {
        return Ok(plan.clone());
    }
    let z = estimate_quantile(&config.params, &config.quantile).stage("quantile")?.z;
    Ok(solve_analytic(config, z)?.plan)
}

fn solve_analytic(config: &ScenarioConfig, z: f64) -> Result<Solution> {
    let p = &config.params;
    match config.solver.mode {
        SolverMode::One | SolverMode::Sweep => analytic::solve_one_intervention(z, p),
        SolverMode::Two => analytic::solve_two_interventions(z, p),
        SolverMode::N => analytic::solve_n_interventions(z, config.solver.n.unwrap_or(1), p),
        SolverMode::TotalCapacity => analytic::solve_total_capacity(z, config.solver.xi_tot.unwrap_or(p.xi_max), p),
    }
    .stage("analytic")
}

/// Monte Carlo check of the configured (or solved) plan.
pub fn run_verify(config: &ScenarioConfig) -> Result<(CapacityPlan, VerificationReport)> {
    let plan = resolve_plan(config)?;
    let report = numeric::verify_constraint_with(&plan, &config.params, config.verify.n_samples, config.quantile.seed, config.verify.tol)
        .stage("verify")?;
    Ok((plan, report))
}

/// Time-stepped path simulation of the configured (or solved) plan.
pub fn run_simulation(config: &ScenarioConfig) -> Result<SimulationReport> {
    let plan = resolve_plan(config)?;
    let s = &config.simulate;
    let totals = simulate_path_totals(&plan, &config.params, s.paths, s.dt, config.quantile.seed).stage("simulate")?;
    Ok(SimulationReport {
        scenario_id: config.scenario_id.clone(),
        summary: PathSummary::from_totals(&totals, s.dt, config.params.target),
        plan,
        target: config.params.target,
        epsilon: config.params.epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[params]
horizon = 30
rho = 0.05
kappa = 1
e_f = 0.7
target = 13125
epsilon = 0.2
xi_max = 2000
demand = { kind = "uniform", lo = 1000, hi = 1500 }
capacity_factor = { kind = "uniform", lo = 0.5, hi = 1 }
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_scenario(MINIMAL, "min").unwrap();
        assert_eq!(c.scenario_id, "min");
        assert_eq!(c.quantile.seed, 0);
        assert_eq!(c.quantile.n_samples, 1_000_000);
        assert_eq!(c.quantile.method, QuantileMethod::MonteCarlo);
        assert_eq!(c.feasibility.margin, 10.0);
        assert_eq!(c.feasibility.tol_dv, 1e-3);
        assert_eq!(c.params.fossil_capacity, 1500.0);
        assert_eq!(c.solver.mode, SolverMode::One);
        assert_eq!(c.output.format, OutputFormat::Csv);
        assert!(c.plan.is_none());
    }

    #[test]
    fn validation_errors() {
        let bad_eps = MINIMAL.replace("epsilon = 0.2", "epsilon = 1.5");
        let e = parse_scenario(&bad_eps, "x").unwrap_err();
        assert!(e.to_string().contains("epsilon must lie in (0,1)"), "{e}");
        assert_eq!(e.exit_code(), 2);

        let sweep = format!("{MINIMAL}\n[solver]\nmode = \"sweep\"\n");
        let e = parse_scenario(&sweep, "x").unwrap_err();
        assert!(e.to_string().contains("rho_list"), "{e}");

        let n = format!("{MINIMAL}\n[solver]\nmode = \"n\"\n");
        assert!(parse_scenario(&n, "x").is_err());

        let typo = format!("{MINIMAL}\n[grid]\nt_pts = 4\n");
        let e = parse_scenario(&typo, "x").unwrap_err();
        assert!(e.to_string().contains("t_pts"), "{e}");

        let no_rho = MINIMAL.replace("rho = 0.05\n", "");
        assert!(parse_scenario(&no_rho, "x").is_err());
        let sweep_no_rho = format!("{no_rho}\n[solver]\nmode = \"sweep\"\nrho_list = [0.05]\n");
        assert_eq!(parse_scenario(&sweep_no_rho, "x").unwrap().params.rho, 0.05);
    }

    #[test]
    fn overrides() {
        let mut c = parse_scenario(MINIMAL, "min").unwrap();
        c.apply_overrides(Some(7), Some(1000)).unwrap();
        assert_eq!(c.quantile.seed, 7);
        assert_eq!(c.verify.n_samples, 1000);
        assert!(c.apply_overrides(None, Some(0)).is_err());
    }

    #[test]
    fn explicit_plan() {
        let text = format!("{MINIMAL}\n[plan]\ninterventions = [[10.0, 300.0], [20.0, 50.0]]\n");
        let c = parse_scenario(&text, "p").unwrap();
        assert_eq!(c.plan.unwrap(), CapacityPlan::new(0.0, &[(10.0, 300.0), (20.0, 50.0)]).unwrap());
        let late = format!("{MINIMAL}\n[plan]\ninterventions = [[31.0, 300.0]]\n");
        assert!(parse_scenario(&late, "p").is_err());
    }

    #[test]
    fn empty_rows_give_header_only() {
        let csv = rows_to_csv(&[]).unwrap();
        assert_eq!(csv, format!("{}\n", CSV_COLUMNS.join(",")));
        assert!(rows_from_csv(&csv).unwrap().is_empty());
    }

    #[test]
    fn curve_argmin_in_interior() {
        let c = parse_scenario(MINIMAL, "min").unwrap();
        let grid = GridSpec { t_points: 301, xi_points: 2 };
        let curve = CostCurve::new(6000.0, &c.params, &grid);
        let (t, _) = curve.argmin().unwrap();
        assert!((t - 10.0).abs() <= grid.t_step(30.0));
    }
}
