//! Closed-form optimal expansion plans.
//!
//! With time-independent `D`, `V` and renewables never covering demand, the
//! chance constraint pins the capacity-weighted remaining time
//! `Σ (T − tᵢ)·ξᵢ` to the ε-upper quantile `z_ε` of `(T·D − L/e_F)/V`.
//! Minimising discounted cost `κ·ξ·e^{−ρt}` along `ξ = z_ε/(T − t)` then has
//! three regimes in ρ, and allowing more interventions never helps.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::check_quantile_condition;
use crate::plan::{CapacityPlan, ScenarioParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `1/T ≤ ρ ≤ ξ_M/z_ε`: wait until `T − 1/ρ`.
    #[serde(rename = "interior")]
    Interior,
    /// `ρ < 1/T`: install `z_ε/T` immediately.
    #[serde(rename = "corner_t0")]
    CornerT0,
    /// `ρ > ξ_M/z_ε`: install `ξ_M` at `T − z_ε/ξ_M`.
    #[serde(rename = "corner_xiM")]
    CornerXiM,
    /// Several interventions were allowed; the optimum uses one.
    #[serde(rename = "collapsed_single")]
    CollapsedSingle,
    /// A numeric optimum with more than one effective intervention.
    #[serde(rename = "multiple")]
    Multiple,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Interior => "interior",
            Regime::CornerT0 => "corner_t0",
            Regime::CornerXiM => "corner_xiM",
            Regime::CollapsedSingle => "collapsed_single",
            Regime::Multiple => "multiple",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub plan: CapacityPlan,
    pub regime: Regime,
    /// Discounted installation cost.
    pub cost: f64,
    pub z_eps: f64,
    pub feasible: bool,
    pub diagnostics: Vec<String>,
}

impl Solution {
    /// Time of the first intervention.
    pub fn time(&self) -> f64 {
        self.plan.interventions().first().map_or(f64::NAN, |iv| iv.time)
    }

    /// Total capacity installed.
    pub fn size(&self) -> f64 {
        self.plan.interventions().iter().map(|iv| iv.total()).sum()
    }

    /// `Σ (T − tᵢ)·ξᵢ`.
    pub fn weighted_capacity(&self, horizon: f64) -> f64 {
        self.plan.interventions().iter().map(|iv| (horizon - iv.time) * iv.total()).sum()
    }
}

/// `κ·(z_ε/(T − t))·e^{−ρt}`: cost of meeting the constraint with a single
/// intervention at `t`.
pub fn single_intervention_cost(z_eps: f64, t: f64, params: &ScenarioParams) -> f64 {
    params.kappa * z_eps / (params.horizon - t) * (-params.rho * t).exp()
}

/// `(t̂, ξ̂, regime)` for one intervention; assumes the quantile condition.
pub fn optimal_single(z_eps: f64, horizon: f64, rho: f64, xi_max: f64) -> (f64, f64, Regime) {
    if rho < 1.0 / horizon {
        (0.0, z_eps / horizon, Regime::CornerT0)
    } else if rho > xi_max / z_eps {
        ((horizon - z_eps / xi_max).max(0.0), xi_max, Regime::CornerXiM)
    } else {
        ((horizon - 1.0 / rho).max(0.0), rho * z_eps, Regime::Interior)
    }
}

fn check_inputs(z_eps: f64, params: &ScenarioParams) -> Result<()> {
    params.validate()?;
    if !(z_eps.is_finite() && z_eps > 0.0) {
        return Err(Error::param(format!("z_eps must be positive and finite, got {z_eps}")));
    }
    if params.fixed_cost != 0.0 {
        return Err(Error::UnsupportedRegime(
            "closed-form timing assumes no fixed intervention cost (K_f = 0)".into(),
        ));
    }
    if !check_quantile_condition(z_eps, params.horizon, params.xi_max) {
        return Err(Error::infeasible(format!(
            "z_eps/T = {} exceeds xi_M = {}: even installing the maximum at t = 0 cannot meet the emission target with violation probability epsilon",
            z_eps / params.horizon,
            params.xi_max
        )));
    }
    Ok(())
}

fn single(z_eps: f64, t: f64, xi: f64, regime: Regime, params: &ScenarioParams, diagnostics: Vec<String>) -> Result<Solution> {
    Ok(Solution {
        plan: CapacityPlan::new(0.0, &[(t, xi)])?,
        regime,
        cost: params.kappa * xi * (-params.rho * t).exp(),
        z_eps,
        feasible: xi <= params.xi_max * (1.0 + 1e-12),
        diagnostics,
    })
}

/// Optimal single intervention.
pub fn solve_one_intervention(z_eps: f64, params: &ScenarioParams) -> Result<Solution> {
    check_inputs(z_eps, params)?;
    let (t, xi, regime) = optimal_single(z_eps, params.horizon, params.rho, params.xi_max);
    single(z_eps, t, xi, regime, params, Vec::new())
}

fn collapsed(z_eps: f64, params: &ScenarioParams, allowed: usize) -> Result<Solution> {
    let mut sol = solve_one_intervention(z_eps, params)?;
    let underlying = sol.regime;
    sol.regime = Regime::CollapsedSingle;
    sol.diagnostics.push(format!(
        "{allowed} interventions allowed; first-order conditions in the later times give t_i = T - 1/rho for i >= 2, then t_1 = T - 1/rho, so all interventions coincide"
    ));
    sol.diagnostics.push(format!("single-intervention regime: {underlying}"));
    if underlying == Regime::CornerXiM {
        sol.diagnostics.push(
            "xi_M caps each intervention separately: staggered interventions that each stay below xi_M can undercut this plan".into(),
        );
    }
    Ok(sol)
}

/// Optimal plan when up to two interventions are allowed.
pub fn solve_two_interventions(z_eps: f64, params: &ScenarioParams) -> Result<Solution> {
    collapsed(z_eps, params, 2)
}

/// Optimal plan when up to `n` interventions are allowed.
pub fn solve_n_interventions(z_eps: f64, n: usize, params: &ScenarioParams) -> Result<Solution> {
    match n {
        0 => Err(Error::param("number of interventions must be at least 1")),
        1 => solve_one_intervention(z_eps, params),
        n => collapsed(z_eps, params, n),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialSolution {
    /// `(t̂₁, ξ̂₁)`, sized for the remaining quantile `z_ε − z̃_ε`.
    pub first: (f64, f64),
    /// `(t̂₂, ξ̂₂)`, sized for `z̃_ε`.
    pub second: (f64, f64),
    /// Both stages merged into one intervention.
    pub solution: Solution,
}

/// Two-stage optimisation: the second intervention carries `z̃_ε` of the
/// quantile, the first the rest. Only the interior regime is supported.
pub fn solve_sequential(z_eps: f64, z_tilde: f64, params: &ScenarioParams) -> Result<SequentialSolution> {
    check_inputs(z_eps, params)?;
    if !(z_tilde > 0.0 && z_tilde < z_eps) {
        return Err(Error::param(format!("z_tilde must lie in (0, z_eps), got {z_tilde}")));
    }
    let (t, _, regime) = optimal_single(z_eps, params.horizon, params.rho, params.xi_max);
    if regime != Regime::Interior {
        return Err(Error::UnsupportedRegime(format!(
            "sequential decomposition needs the interior regime 1/T <= rho <= xi_M/z_eps; rho = {} is {regime}",
            params.rho
        )));
    }
    let second = (t, params.rho * z_tilde);
    let first = (t, params.rho * (z_eps - z_tilde));
    let diagnostics = vec![format!(
        "stages coincide at t = {t}; merged xi_1 = {} and xi_2 = {} into one intervention",
        first.1, second.1
    )];
    let solution = single(z_eps, t, first.1 + second.1, Regime::Interior, params, diagnostics)?;
    Ok(SequentialSolution { first, second, solution })
}

/// Two interventions constrained to `ξ₁ + ξ₂ = ξ_tot`: by convexity of the
/// discount factor the optimum installs everything at `T − z_ε/ξ_tot`.
pub fn solve_total_capacity(z_eps: f64, xi_tot: f64, params: &ScenarioParams) -> Result<Solution> {
    params.validate()?;
    if !(z_eps.is_finite() && z_eps > 0.0) {
        return Err(Error::param(format!("z_eps must be positive and finite, got {z_eps}")));
    }
    if !(xi_tot.is_finite() && xi_tot > 0.0) {
        return Err(Error::param("total capacity must be positive"));
    }
    if z_eps > params.horizon * xi_tot {
        return Err(Error::infeasible(format!(
            "z_eps = {z_eps} exceeds T * xi_tot = {}: the total capacity cannot meet the target",
            params.horizon * xi_tot
        )));
    }
    let t = (params.horizon - z_eps / xi_tot).max(0.0);
    let mut diagnostics = vec!["first-order conditions give xi_1 = 0, xi_2 = xi_tot".to_string()];
    if xi_tot > params.xi_max {
        diagnostics.push(format!("xi_tot = {xi_tot} exceeds the per-intervention cap xi_M = {}", params.xi_max));
    }
    single(z_eps, t, xi_tot, Regime::CollapsedSingle, params, diagnostics)
}
