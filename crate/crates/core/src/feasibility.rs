//! Standing-assumption checks and the constructive feasibility bisection.
//!
//! "Much larger than ε" is read as `prob ≥ margin·ε` and "approximately zero"
//! as `prob ≤ tol_dv`; both thresholds are configurable. The margin threshold
//! is capped at 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::plan::ScenarioParams;
use crate::stochastic::{sample, sample_pair, tags};

pub const DEFAULT_MARGIN: f64 = 10.0;
pub const DEFAULT_TOL_DV: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub prob: f64,
    pub satisfied: bool,
    pub n_samples: usize,
}

fn demand_draws(params: &ScenarioParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    Ok(sample(&params.demand, par::derive_seed(par::derive_seed(seed, tags::FEASIBILITY), tags::DEMAND), n)?.values)
}

/// Threshold `margin·ε`, capped at 1 so that a certain event always counts.
fn required_prob(margin: f64, epsilon: f64) -> f64 {
    (margin * epsilon).min(1.0)
}

/// `P(e_F·T·min(D, C_F) ≥ L) ≥ 10·ε`: the target is reachable by fossil
/// output alone often enough for the constraint to bind.
pub fn check_target_reachable(params: &ScenarioParams, n_samples: usize, seed: u64) -> Result<CheckResult> {
    check_target_reachable_with(params, n_samples, seed, DEFAULT_MARGIN)
}

pub fn check_target_reachable_with(params: &ScenarioParams, n_samples: usize, seed: u64, margin: f64) -> Result<CheckResult> {
    let d = demand_draws(params, n_samples, seed)?;
    let hits = par::count(n_samples, |i| {
        params.e_f * params.horizon * d[i].min(params.fossil_capacity) >= params.target
    });
    let prob = hits as f64 / n_samples as f64;
    Ok(CheckResult { prob, satisfied: prob >= required_prob(margin, params.epsilon), n_samples })
}

/// `P(e_F·T·D > L) ≥ margin·ε`: doing nothing violates the target far more
/// often than allowed, which rules out intervening at `t = T`.
pub fn check_do_nothing_violation(params: &ScenarioParams, n_samples: usize, seed: u64, margin: f64) -> Result<CheckResult> {
    let d = demand_draws(params, n_samples, seed)?;
    let hits = par::count(n_samples, |i| params.e_f * params.horizon * d[i] > params.target);
    let prob = hits as f64 / n_samples as f64;
    Ok(CheckResult { prob, satisfied: prob >= required_prob(margin, params.epsilon), n_samples })
}

/// `P(D < N·ξ_M·V) ≤ 10⁻³`: renewables cannot cover demand even when all
/// `N` interventions install the maximum.
pub fn check_dv_condition(params: &ScenarioParams, n_interventions: usize, n_samples: usize, seed: u64) -> Result<CheckResult> {
    check_dv_condition_with(params, n_interventions, n_samples, seed, DEFAULT_TOL_DV)
}

pub fn check_dv_condition_with(
    params: &ScenarioParams,
    n_interventions: usize,
    n_samples: usize,
    seed: u64,
    tol_dv: f64,
) -> Result<CheckResult> {
    params.validate()?;
    if n_interventions == 0 {
        return Err(Error::param("number of interventions must be at least 1"));
    }
    let (d, v) = sample_pair(&params.demand, &params.capacity_factor, par::derive_seed(seed, tags::FEASIBILITY), n_samples)?;
    let cap = n_interventions as f64 * params.xi_max;
    let hits = par::count(n_samples, |i| d[i] < cap * v[i]);
    let prob = hits as f64 / n_samples as f64;
    Ok(CheckResult { prob, satisfied: prob <= tol_dv, n_samples })
}

/// `0 < z_ε/T ≤ ξ_M`.
pub fn check_quantile_condition(z_eps: f64, horizon: f64, xi_max: f64) -> bool {
    let per_year = z_eps / horizon;
    per_year > 0.0 && per_year <= xi_max
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionResult {
    pub xi: f64,
    /// Empirical `P(I(ξ) ≥ L/e_F)` at the returned ξ.
    pub prob: f64,
    /// False when the empirical tail jumps across ε (atoms in `D` or `V`);
    /// `xi` is then the jump location.
    pub within_tolerance: bool,
    pub iterations: usize,
    /// Every `(ξ, probability)` evaluated, in evaluation order.
    pub trace: Vec<(f64, f64)>,
}

/// Capacity installed at `t = 0` that meets the chance constraint.
///
/// Uses one set of `(D, V)` draws for every ξ, so the empirical tail
/// `P(I(ξ) ≥ L/e_F)` with `I(ξ) = T·[(D−ξV)·1(D−ξV ∈ [0,C_F]) + C_F·1(D−ξV > C_F)]`
/// is non-increasing in ξ and bisection on it is sound.
pub fn feasible_xi_bisection(params: &ScenarioParams, n_samples: usize, seed: u64, tol: f64) -> Result<BisectionResult> {
    params.validate()?;
    if !(tol > 0.0) {
        return Err(Error::param("bisection tolerance must be positive"));
    }
    let (d, v) = sample_pair(&params.demand, &params.capacity_factor, par::derive_seed(seed, tags::BISECTION), n_samples)?;
    let needed = params.target_energy();
    let fossil_years = |residual: f64| {
        params.horizon
            * if residual < 0.0 {
                0.0
            } else if residual <= params.fossil_capacity {
                residual
            } else {
                params.fossil_capacity
            }
    };
    let mut trace = Vec::new();
    let mut tail = |xi: f64| {
        let p = par::count(n_samples, |i| fossil_years(d[i] - xi * v[i]) >= needed) as f64 / n_samples as f64;
        trace.push((xi, p));
        p
    };
    let eps = params.epsilon;

    let at_zero = tail(0.0);
    if at_zero < eps - tol {
        return Err(Error::infeasible(format!(
            "tail at ξ = 0 is {at_zero} < ε = {eps}; adding capacity only lowers it"
        )));
    }
    if (at_zero - eps).abs() <= tol {
        return Ok(BisectionResult { xi: 0.0, prob: at_zero, within_tolerance: true, iterations: 0, trace });
    }
    let mut hi = 1.0;
    let mut p_hi = tail(hi);
    let mut doublings = 0;
    while p_hi > eps + tol {
        if doublings == 60 {
            return Err(Error::infeasible(format!(
                "tail stays at {p_hi} > ε = {eps} up to ξ = {hi}"
            )));
        }
        hi *= 2.0;
        p_hi = tail(hi);
        doublings += 1;
    }
    let (mut lo, mut p_lo) = (0.0, at_zero);
    let mut iterations = 0;
    let mut result = if (p_hi - eps).abs() <= tol { Some((hi, p_hi, true)) } else { None };
    while result.is_none() {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let p = tail(mid);
        if (p - eps).abs() <= tol {
            result = Some((mid, p, true));
        } else if p > eps {
            (lo, p_lo) = (mid, p);
        } else {
            (hi, p_hi) = (mid, p);
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            let (xi, p) = if (p_lo - eps).abs() <= (p_hi - eps).abs() { (lo, p_lo) } else { (hi, p_hi) };
            result = Some((xi, p, false));
        }
    }
    let (xi, prob, within_tolerance) = result.expect("loop exits with a result");

    let mut sorted = trace.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.windows(2).any(|w| w[1].1 > w[0].1) {
        return Err(Error::Numerical("empirical tail is not monotone in ξ".into()));
    }
    Ok(BisectionResult { xi, prob, within_tolerance, iterations, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::RandomVariable;

    fn params(demand: RandomVariable, capacity_factor: RandomVariable) -> ScenarioParams {
        ScenarioParams {
            horizon: 30.0,
            rho: 0.05,
            kappa: 1.0,
            fixed_cost: 0.0,
            e_f: 0.7,
            e_i: 0.0,
            fossil_capacity: 2000.0,
            target: 2700.0,
            epsilon: 0.2,
            xi_max: 1000.0,
            demand,
            capacity_factor,
        }
    }

    fn baseline() -> ScenarioParams {
        params(RandomVariable::uniform(1000.0, 1500.0).unwrap(), RandomVariable::uniform(0.0, 1.0).unwrap())
    }

    #[test]
    fn target_reachable_examples() {
        let r = check_target_reachable(&baseline(), 100_000, 1).unwrap();
        assert_eq!(r.prob, 1.0);
        assert!(r.satisfied);

        let p = ScenarioParams { target: 1e9, ..baseline() };
        let r = check_target_reachable(&p, 100_000, 1).unwrap();
        assert_eq!(r.prob, 0.0);
        assert!(!r.satisfied);

        // median emissions: exact uniform CDF gives 1/2
        let p = ScenarioParams { target: 0.7 * 30.0 * 1250.0, ..baseline() };
        let r = check_target_reachable(&p, 1_000_000, 1).unwrap();
        assert!((r.prob - 0.5).abs() < 3.0 * (0.25f64 / 1e6).sqrt() + 1e-12, "{}", r.prob);
        assert!(!r.satisfied);
    }

    #[test]
    fn dv_examples() {
        let r = check_dv_condition(&baseline(), 1, 100_000, 5).unwrap();
        assert_eq!(r.prob, 0.0);
        assert!(r.satisfied);

        // ∫₀¹ clamp((2000v − 1000)/500, 0, 1) dv by composite Simpson
        let f = |v: f64| ((2000.0 * v - 1000.0) / 500.0).clamp(0.0, 1.0);
        let m = 4000;
        let h = 1.0 / m as f64;
        let exact: f64 = (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * f(i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((exact - 0.375).abs() < 1e-6);
        let n = 1_000_000;
        let r = check_dv_condition(&baseline(), 2, n, 5).unwrap();
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((r.prob - exact).abs() < 3.0 * se, "{} vs {exact}", r.prob);
        assert!(!r.satisfied);

        let p = ScenarioParams { xi_max: 10.0, ..baseline() };
        assert_eq!(check_dv_condition(&p, 1, 10_000, 5).unwrap().prob, 0.0);
        assert!(check_dv_condition(&p, 0, 10, 5).is_err());
    }

    #[test]
    fn quantile_condition() {
        assert!(check_quantile_condition(6000.0, 30.0, 1000.0));
        assert!(!check_quantile_condition(45_000.0, 30.0, 1000.0));
        assert!(!check_quantile_condition(0.0, 30.0, 1000.0));
        assert!(check_quantile_condition(30_000.0, 30.0, 1000.0));
    }

    #[test]
    fn bisection_rejects_unreachable_epsilon() {
        // do-nothing violation probability is 0 when L is huge
        let p = ScenarioParams { target: 1e9, ..baseline() };
        assert!(matches!(feasible_xi_bisection(&p, 10_000, 0, 1e-3), Err(Error::Infeasible(_))));
    }

    #[test]
    fn bisection_finds_deterministic_threshold() {
        let mut p = params(RandomVariable::constant(1250.0).unwrap(), RandomVariable::constant(0.5).unwrap());
        p.target = 13_125.0;
        for eps in [0.05, 0.2, 0.9] {
            p.epsilon = eps;
            let r = feasible_xi_bisection(&p, 1000, 0, 1e-3).unwrap();
            assert!((r.xi - 1250.0).abs() < 1e-6, "{}", r.xi);
            assert!(!r.within_tolerance);
        }
    }

    #[test]
    fn bisection_trace_is_monotone_and_short() {
        let mut p = params(RandomVariable::uniform(1000.0, 1500.0).unwrap(), RandomVariable::uniform(0.5, 1.0).unwrap());
        p.target = 13_125.0;
        let r = feasible_xi_bisection(&p, 200_000, 4, 1e-3).unwrap();
        assert!(r.within_tolerance);
        assert!((r.prob - 0.2).abs() <= 1e-3);
        let hi = r.trace.iter().map(|t| t.0).fold(0.0, f64::max);
        assert!(r.iterations as f64 <= (hi / 1e-12).log2().ceil());
    }
}
