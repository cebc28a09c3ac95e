//! Brute-force grid optimisation and Monte Carlo constraint checks.
//!
//! The chance constraint is eliminated exactly: on every grid point the
//! first intervention's size is solved from `Σ (T − tᵢ)·ξᵢ = z_ε`, so every
//! candidate plan is feasible and only cost is compared. Minima are reduced
//! with a total order (cost, then times, then sizes), so results do not
//! depend on evaluation order or thread count.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::analytic::{Regime, Solution};
use crate::energy::emissions_total;
use crate::error::{Error, Result};
use crate::par;
use crate::plan::{CapacityPlan, ScenarioParams};
use crate::stochastic::{sample_pair, tags};

/// Exhaustive search is refused above this many candidate plans.
pub const MAX_CANDIDATES: f64 = 5e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Uniform points on `[0, T]`; `T` itself is never feasible.
    pub t_points: usize,
    /// Uniform sizes on `(0, ξ_M]` for every intervention after the first.
    pub xi_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { t_points: 3001, xi_points: 100 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.t_points < 2 || self.xi_points < 2 {
            return Err(Error::config("grid needs at least 2 points in t and in xi"));
        }
        Ok(())
    }

    pub fn t_step(&self, horizon: f64) -> f64 {
        horizon / (self.t_points - 1) as f64
    }

    /// Uniform times below `T`, plus `extra` corner points inside `[0, T)`.
    /// A corner replaces any uniform point within rounding distance of it.
    pub fn times(&self, horizon: f64, extra: &[f64]) -> Vec<f64> {
        let step = self.t_step(horizon);
        let extra: Vec<f64> = extra.iter().copied().filter(|t| (0.0..horizon).contains(t)).collect();
        let mut ts: Vec<f64> = (0..self.t_points - 1)
            .map(|k| k as f64 * step)
            .filter(|t| extra.iter().all(|e| (t - e).abs() > 1e-9 * horizon))
            .collect();
        ts.extend(extra);
        ts.sort_unstable_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    pub fn sizes(&self, xi_max: f64) -> Vec<f64> {
        (1..=self.xi_points).map(|j| j as f64 * xi_max / self.xi_points as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    cost: f64,
    times: Vec<f64>,
    sizes: Vec<f64>,
}

impl Candidate {
    fn order(&self, other: &Candidate) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| cmp_slices(&self.times, &other.times))
            .then_with(|| cmp_slices(&self.sizes, &other.sizes))
    }
}

fn cmp_slices(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn keep_best(best: &mut Option<Candidate>, cost: f64, times: &[f64], sizes: &[f64]) {
    let replace = match best {
        None => true,
        Some(b) => match cost.total_cmp(&b.cost) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => {
                let c = Candidate { cost, times: times.to_vec(), sizes: sizes.to_vec() };
                c.order(b).is_lt()
            }
        },
    };
    if replace {
        *best = Some(Candidate { cost, times: times.to_vec(), sizes: sizes.to_vec() });
    }
}

fn reduce(rows: Vec<Option<Candidate>>) -> Option<Candidate> {
    rows.into_iter().flatten().min_by(|a, b| a.order(b))
}

fn check_inputs(z_eps: f64, params: &ScenarioParams, grid: &GridSpec) -> Result<()> {
    params.validate()?;
    grid.validate()?;
    if !(z_eps.is_finite() && z_eps > 0.0) {
        return Err(Error::param(format!("z_eps must be positive and finite, got {z_eps}")));
    }
    Ok(())
}

fn classify_single(t: f64, xi: f64, xi_max: f64) -> Regime {
    if t == 0.0 {
        Regime::CornerT0
    } else if (xi - xi_max).abs() <= 1e-9 * xi_max {
        Regime::CornerXiM
    } else {
        Regime::Interior
    }
}

fn to_solution(best: Candidate, z_eps: f64, params: &ScenarioParams, max_interventions: usize, step: f64) -> Result<Solution> {
    // sizes left over from rounding in the solved first size are not interventions
    let largest = best.sizes.iter().copied().fold(0.0, f64::max);
    let mut sorted: Vec<(f64, f64)> = best
        .times
        .iter()
        .zip(&best.sizes)
        .filter(|(_, &xi)| xi > 1e-9 * largest)
        .map(|(&t, &xi)| (t, xi))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let regime = match (sorted.len(), max_interventions) {
        (1, 1) => classify_single(sorted[0].0, sorted[0].1, params.xi_max),
        (1, _) => Regime::CollapsedSingle,
        _ => Regime::Multiple,
    };
    let diagnostics = vec![format!(
        "grid argmin over at most {max_interventions} interventions (t step {step}): times {:?}, sizes {:?}",
        best.times, best.sizes
    )];
    Ok(Solution {
        plan: CapacityPlan::new(0.0, &sorted)?,
        regime,
        cost: best.cost,
        z_eps,
        feasible: sorted.iter().all(|&(_, xi)| xi <= params.xi_max * (1.0 + 1e-12)),
        diagnostics,
    })
}

fn empty_feasible_set(z_eps: f64, params: &ScenarioParams) -> Error {
    Error::infeasible(format!(
        "no grid plan meets z_eps = {z_eps} with per-intervention sizes <= xi_M = {}",
        params.xi_max
    ))
}

/// Grid minimum of `κ·ξ(t)·e^{−ρt}` with `ξ(t) = z_ε/(T − t) ≤ ξ_M`.
pub fn grid_search_one(z_eps: f64, params: &ScenarioParams, grid: &GridSpec) -> Result<Solution> {
    grid_search_n(z_eps, 1, params, grid)
}

/// Grid minimum over plans with at most two interventions.
pub fn grid_search_two(z_eps: f64, params: &ScenarioParams, grid: &GridSpec) -> Result<Solution> {
    grid_search_n(z_eps, 2, params, grid)
}

/// Grid minimum over plans with at most `n ≤ 4` interventions.
///
/// Enumerates every strictly increasing time tuple of length `k ≤ n` and
/// every size on the ξ grid for interventions `2..k`; the first size is then
/// fixed by the constraint and kept when it lies in `[0, ξ_M]`. The search
/// space for `n` contains the one for `n − 1`.
pub fn grid_search_n(z_eps: f64, n: usize, params: &ScenarioParams, grid: &GridSpec) -> Result<Solution> {
    check_inputs(z_eps, params, grid)?;
    if n == 0 || n > 4 {
        return Err(Error::config(format!("exhaustive search supports 1 to 4 interventions, got {n}")));
    }
    let horizon = params.horizon;
    let times = grid.times(horizon, &[horizon - z_eps / params.xi_max]);
    let sizes = grid.sizes(params.xi_max);
    let m = times.len() as f64;
    let budget: f64 = (1..=n)
        .map(|k| {
            let combos = (0..k).fold(1.0, |acc, i| acc * (m - i as f64) / (i + 1) as f64);
            combos * (sizes.len() as f64).powi(k as i32 - 1)
        })
        .sum();
    if budget > MAX_CANDIDATES {
        return Err(Error::config(format!(
            "grid search over {n} interventions needs ~{budget:.3e} evaluations (limit {MAX_CANDIDATES:.0e}); use a coarser grid"
        )));
    }
    let remaining: Vec<f64> = times.iter().map(|t| horizon - t).collect();
    let discount: Vec<f64> = times.iter().map(|t| (-params.rho * t).exp()).collect();
    let search = Search { z_eps, params, times: &times, sizes: &sizes, remaining: &remaining, discount: &discount };

    let rows = par::map_indices(times.len(), |first| {
        let mut best = None;
        let mut tuple_t = vec![times[first]];
        let mut tuple_xi = vec![0.0];
        search.extend(first, n - 1, 0.0, 0.0, &mut tuple_t, &mut tuple_xi, &mut best);
        best
    });
    let best = reduce(rows).ok_or_else(|| empty_feasible_set(z_eps, params))?;
    to_solution(best, z_eps, params, n, grid.t_step(horizon))
}

struct Search<'a> {
    z_eps: f64,
    params: &'a ScenarioParams,
    times: &'a [f64],
    sizes: &'a [f64],
    remaining: &'a [f64],
    discount: &'a [f64],
}

impl Search<'_> {
    /// Closes the current tuple (solving the first size), then recurses into
    /// tuples with up to `slots` more interventions after index `last`.
    #[allow(clippy::too_many_arguments)]
    fn extend(
        &self,
        last: usize,
        slots: usize,
        covered: f64,
        later_cost: f64,
        tuple_t: &mut Vec<f64>,
        tuple_xi: &mut Vec<f64>,
        best: &mut Option<Candidate>,
    ) {
        let first = self.times.iter().position(|&t| t == tuple_t[0]).expect("first time on grid");
        let xi_first = (self.z_eps - covered) / self.remaining[first];
        if (0.0..=self.params.xi_max).contains(&xi_first) {
            let cost = self.params.kappa * (xi_first * self.discount[first] + later_cost);
            tuple_xi[0] = xi_first;
            keep_best(best, cost, tuple_t, tuple_xi);
        }
        if slots == 0 {
            return;
        }
        for next in last + 1..self.times.len() {
            for &xi in self.sizes {
                let covered_next = covered + xi * self.remaining[next];
                if covered_next > self.z_eps {
                    break;
                }
                tuple_t.push(self.times[next]);
                tuple_xi.push(xi);
                self.extend(next, slots - 1, covered_next, later_cost + xi * self.discount[next], tuple_t, tuple_xi, best);
                tuple_t.pop();
                tuple_xi.pop();
            }
        }
    }
}

/// Two interventions with `ξ₁ + ξ₂ = ξ_tot`, `t₁ < t₂` on the grid, plus the
/// single intervention `ξ_tot` at `T − z_ε/ξ_tot`.
pub fn grid_search_total_capacity(z_eps: f64, xi_tot: f64, params: &ScenarioParams, grid: &GridSpec) -> Result<Solution> {
    check_inputs(z_eps, params, grid)?;
    if !(xi_tot.is_finite() && xi_tot > 0.0) {
        return Err(Error::param("total capacity must be positive"));
    }
    let horizon = params.horizon;
    let corner = horizon - z_eps / xi_tot;
    let times = grid.times(horizon, &[corner]);
    let discount = |t: f64| (-params.rho * t).exp();
    let rows = par::map_indices(times.len(), |i| {
        let t1 = times[i];
        let mut best = None;
        if t1 == corner {
            keep_best(&mut best, params.kappa * xi_tot * discount(t1), &[t1], &[xi_tot]);
        }
        for &t2 in &times[i + 1..] {
            let xi1 = (z_eps - (horizon - t2) * xi_tot) / (t2 - t1);
            if (0.0..=xi_tot).contains(&xi1) {
                let xi2 = xi_tot - xi1;
                let cost = params.kappa * (xi1 * discount(t1) + xi2 * discount(t2));
                keep_best(&mut best, cost, &[t1, t2], &[xi1, xi2]);
            }
        }
        best
    });
    let best = reduce(rows).ok_or_else(|| {
        Error::infeasible(format!("no grid plan installs xi_tot = {xi_tot} and meets z_eps = {z_eps}"))
    })?;
    let mut sol = to_solution(best, z_eps, params, 2, grid.t_step(horizon))?;
    sol.feasible = true;
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Estimated `P(E(T) > L)`.
    pub estimated_prob: f64,
    /// Estimated `P(E(T) ≥ L)`; differs only when `E(T)` has an atom at `L`.
    pub estimated_prob_geq: f64,
    pub target_eps: f64,
    pub n_samples: usize,
    /// Binomial standard error of `estimated_prob`.
    pub std_error: f64,
    pub pass: bool,
}

/// Monte Carlo estimate of `P(E(T) > L)` for `plan` with `pass` iff the
/// estimate is within three standard errors of ε.
pub fn verify_constraint(plan: &CapacityPlan, params: &ScenarioParams, n_samples: usize, seed: u64) -> Result<VerificationReport> {
    verify_constraint_with(plan, params, n_samples, seed, 0.0)
}

/// As [`verify_constraint`], passing when `|p̂ − ε| ≤ max(3·se, tol)`.
///
/// `E(T)` is evaluated exactly for each constant `(D, V)` draw, keeping the
/// `(·)⁺` clip where renewables exceed demand.
pub fn verify_constraint_with(
    plan: &CapacityPlan,
    params: &ScenarioParams,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    params.validate()?;
    plan.validate_horizon(params.horizon)?;
    let (d, v) = sample_pair(&params.demand, &params.capacity_factor, par::derive_seed(seed, tags::VERIFY), n_samples)?;
    let counts = par::map_chunks(n_samples, |_, range| {
        range.fold((0usize, 0usize), |(gt, ge), i| {
            let e = emissions_total(plan, d[i], v[i], params);
            (gt + (e > params.target) as usize, ge + (e >= params.target) as usize)
        })
    });
    let (gt, ge) = counts.into_iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_samples as f64;
    let p = gt as f64 / n;
    let std_error = (p * (1.0 - p) / n).sqrt();
    Ok(VerificationReport {
        estimated_prob: p,
        estimated_prob_geq: ge as f64 / n,
        target_eps: params.epsilon,
        n_samples,
        std_error,
        pass: (p - params.epsilon).abs() <= (3.0 * std_error).max(tol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{solve_one_intervention, solve_total_capacity};
    use crate::stochastic::RandomVariable;

    fn params(rho: f64) -> ScenarioParams {
        ScenarioParams {
            horizon: 30.0,
            rho,
            kappa: 1.0,
            fixed_cost: 0.0,
            e_f: 0.7,
            e_i: 0.0,
            fossil_capacity: 1500.0,
            target: 2700.0,
            epsilon: 0.2,
            xi_max: 1000.0,
            demand: RandomVariable::uniform(1000.0, 1500.0).unwrap(),
            capacity_factor: RandomVariable::uniform(0.0, 1.0).unwrap(),
        }
    }

    const FINE: GridSpec = GridSpec { t_points: 3001, xi_points: 10 };

    #[test]
    fn one_intervention_regimes() {
        let s = grid_search_one(6000.0, &params(0.05), &FINE).unwrap();
        let analytic = solve_one_intervention(6000.0, &params(0.05)).unwrap();
        assert!((s.time() - 10.0).abs() <= 0.01);
        assert!((s.cost / analytic.cost - 1.0).abs() < 1e-4);
        assert_eq!(s.regime, Regime::Interior);

        let s = grid_search_one(6000.0, &params(0.02), &FINE).unwrap();
        assert_eq!(s.time(), 0.0);
        assert_eq!(s.regime, Regime::CornerT0);

        let s = grid_search_one(6000.0, &params(0.2), &FINE).unwrap();
        assert!((s.time() - 24.0).abs() <= 0.01);
        assert_eq!(s.regime, Regime::CornerXiM);
    }

    #[test]
    fn empty_feasible_set() {
        assert!(matches!(grid_search_one(45_000.0, &params(0.05), &FINE), Err(Error::Infeasible(_))));
        assert!(grid_search_n(6000.0, 5, &params(0.05), &FINE).is_err());
        assert!(grid_search_one(6000.0, &params(0.05), &GridSpec { t_points: 1, xi_points: 3 }).is_err());
        let huge = GridSpec { t_points: 100_000, xi_points: 1000 };
        assert!(matches!(grid_search_n(6000.0, 4, &params(0.05), &huge), Err(Error::Config(_))));
    }

    #[test]
    fn two_interventions_collapse_in_interior() {
        let grid = GridSpec { t_points: 301, xi_points: 50 };
        let p = params(0.05);
        let two = grid_search_two(6000.0, &p, &grid).unwrap();
        let one = grid_search_one(6000.0, &p, &grid).unwrap();
        let analytic = solve_one_intervention(6000.0, &p).unwrap();
        assert!(two.cost >= analytic.cost - 1e-9);
        assert!(two.cost <= one.cost);
        assert_eq!(two.plan.interventions().len(), 1, "{:?}", two.diagnostics);
        assert_eq!(two.regime, Regime::CollapsedSingle);
        assert_eq!(two.plan, one.plan);
    }

    #[test]
    fn staggering_beats_single_when_cap_binds() {
        // ρ > ξ_M/z_ε: each intervention is capped at ξ_M, two capped
        // interventions close to T − 1/ρ undercut the single-intervention corner.
        let grid = GridSpec { t_points: 301, xi_points: 50 };
        let p = params(0.2);
        let two = grid_search_two(6000.0, &p, &grid).unwrap();
        let analytic = solve_one_intervention(6000.0, &p).unwrap();
        assert_eq!(two.regime, Regime::Multiple);
        assert!(two.cost < analytic.cost);
    }

    #[test]
    fn total_capacity_grid() {
        let grid = GridSpec { t_points: 301, xi_points: 10 };
        let p = params(0.05);
        let s = grid_search_total_capacity(6000.0, 1000.0, &p, &grid).unwrap();
        let a = solve_total_capacity(6000.0, 1000.0, &p).unwrap();
        assert!((s.time() - a.time()).abs() <= grid.t_step(30.0));
        assert!((s.size() - 1000.0).abs() < 1e-9);
        assert!(s.cost >= a.cost - 1e-9);
    }

    #[test]
    fn verify_certain_violation() {
        let r = verify_constraint(&CapacityPlan::empty(), &params(0.05), 10_000, 1).unwrap();
        assert_eq!(r.estimated_prob, 1.0);
        assert_eq!(r.std_error, 0.0);
        assert!(!r.pass);
    }

    #[test]
    fn verify_probability_bounds() {
        // far more renewables than demand: emissions only from low-V draws
        let plan = CapacityPlan::new(0.0, &[(0.0, 1e6)]).unwrap();
        let r = verify_constraint(&plan, &params(0.05), 50_000, 2).unwrap();
        assert!((0.0..=1.0).contains(&r.estimated_prob));
        assert!(r.estimated_prob <= r.estimated_prob_geq);
    }
}
