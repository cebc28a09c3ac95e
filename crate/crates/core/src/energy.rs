//! Fossil dispatch, emission rates and accumulated emissions `E(T)`.
//!
//! Two evaluation routes are provided and cross-checked in tests:
//! closed forms for time-independent `D` and `V`, and a left-endpoint
//! Riemann sum over sampled demand and capacity-factor paths.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::plan::{CapacityPlan, ScenarioParams};
use crate::stochastic::tags;

/// Fossil output for a residual load: renewables first, fossil clipped to `[0, C_F]`.
pub fn dispatch_fossil(demand: f64, renewable: f64, fossil_capacity: f64) -> f64 {
    (demand - renewable).clamp(0.0, fossil_capacity)
}

/// Emission rate of residual load `x`: fossil up to `C_F`, imports beyond.
pub fn emission_rate(x: f64, e_f: f64, e_i: f64, fossil_capacity: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else if x < fossil_capacity {
        e_f * x
    } else {
        e_i * (x - fossil_capacity) + e_f * fossil_capacity
    }
}

fn rate(params: &ScenarioParams, residual: f64) -> f64 {
    emission_rate(residual, params.e_f, params.e_i, params.fossil_capacity)
}

/// `P_R(t)` with one capacity factor shared by every technology.
pub fn renewable_production(plan: &CapacityPlan, capacity_factor: f64, t: f64) -> f64 {
    plan.total_capacity_at(t) * capacity_factor
}

/// `P_R(t) = Σⱼ C_j(t)·V_j`.
pub fn renewable_production_multi(plan: &CapacityPlan, capacity_factors: &[f64], t: f64) -> Result<f64> {
    if capacity_factors.len() != plan.technologies() {
        return Err(Error::input(format!(
            "{} capacity factors for {} technologies",
            capacity_factors.len(),
            plan.technologies()
        )));
    }
    Ok(plan.capacity_at(t).iter().zip(capacity_factors).map(|(c, v)| c * v).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub emissions: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionsResult {
    /// Tons CO₂ over `[0, T]`.
    pub total: f64,
    pub breakdown: Vec<Segment>,
}

/// Constant-capacity stretches `[start, end)` of a plan on `[0, T]`.
fn plan_segments(plan: &CapacityPlan, horizon: f64) -> Vec<(f64, f64, f64)> {
    let mut bounds = vec![0.0];
    bounds.extend(plan.interventions().iter().map(|iv| iv.time).filter(|&t| t > 0.0 && t < horizon));
    bounds.push(horizon);
    bounds
        .windows(2)
        .map(|w| (w[0], w[1], plan.total_capacity_at(w[0])))
        .collect()
}

/// `E(T) = e_F·(T·d − v·Σᵢ (T − tᵢ)·ξᵢ)` (plus the initial capacity term).
///
/// Only valid while renewables never cover demand, `d ≥ v·C_R(T)`
/// (condition DV), and fossil capacity covers demand, `d ≤ C_F`.
pub fn emissions_closed_form(
    plan: &CapacityPlan,
    demand: f64,
    capacity_factor: f64,
    params: &ScenarioParams,
) -> Result<EmissionsResult> {
    let sizes = plan.single_technology()?;
    plan.validate_horizon(params.horizon)?;
    let horizon = params.horizon;
    if demand - capacity_factor * plan.final_capacity() < 0.0 {
        return Err(Error::ModelAssumption {
            condition: "DV",
            detail: format!(
                "renewable output {} exceeds demand {demand}; the linear form needs D ≥ ξV",
                capacity_factor * plan.final_capacity()
            ),
        });
    }
    if demand > params.fossil_capacity {
        return Err(Error::ModelAssumption {
            condition: "D ≤ C_F",
            detail: format!("demand {demand} exceeds fossil capacity {}", params.fossil_capacity),
        });
    }
    let weighted: f64 = plan.initial_capacity()[0] * horizon
        + sizes.iter().map(|&(t, xi)| (horizon - t) * xi).sum::<f64>();
    let total = params.e_f * (horizon * demand - capacity_factor * weighted);
    let breakdown = plan_segments(plan, horizon)
        .into_iter()
        .map(|(start, end, cap)| Segment {
            start,
            end,
            emissions: params.e_f * (end - start) * (demand - cap * capacity_factor),
        })
        .collect();
    Ok(EmissionsResult { total, breakdown })
}

/// Exact `E(T)` for constant demand and capacity factor under any plan,
/// keeping the `(·)⁺` clip, the fossil cap and import emissions.
pub fn emissions_piecewise(
    plan: &CapacityPlan,
    demand: f64,
    capacity_factor: f64,
    params: &ScenarioParams,
) -> EmissionsResult {
    let breakdown: Vec<Segment> = plan_segments(plan, params.horizon)
        .into_iter()
        .map(|(start, end, cap)| Segment {
            start,
            end,
            emissions: (end - start) * rate(params, demand - cap * capacity_factor),
        })
        .collect();
    EmissionsResult { total: breakdown.iter().map(|s| s.emissions).sum(), breakdown }
}

/// Total only; the allocation-free hot path of [`emissions_piecewise`].
pub(crate) fn emissions_total(plan: &CapacityPlan, demand: f64, capacity_factor: f64, params: &ScenarioParams) -> f64 {
    let mut total = 0.0;
    let mut start = 0.0;
    let mut cap: f64 = plan.initial_capacity().iter().sum();
    for iv in plan.interventions() {
        let t = iv.time.min(params.horizon);
        total += (t - start) * rate(params, demand - cap * capacity_factor);
        start = t;
        cap += iv.total();
    }
    total + (params.horizon - start) * rate(params, demand - cap * capacity_factor)
}

/// Moves each intervention down to the grid point at or below it.
/// Interventions landing on the same point are merged.
pub fn snap_to_grid(plan: &CapacityPlan, dt: f64) -> (CapacityPlan, bool) {
    let mut snapped = false;
    let mut merged: Vec<(f64, Vec<f64>)> = Vec::new();
    for iv in plan.interventions() {
        let steps = (iv.time / dt + 1e-9).floor();
        let t = steps * dt;
        if (t - iv.time).abs() > 1e-9 * dt.max(iv.time) {
            snapped = true;
        }
        match merged.last_mut() {
            Some((last, sizes)) if *last == t => {
                for (a, b) in sizes.iter_mut().zip(&iv.sizes) {
                    *a += b;
                }
            }
            _ => merged.push((t, iv.sizes.clone())),
        }
    }
    let plan = CapacityPlan::multi(plan.initial_capacity().to_vec(), merged)
        .expect("snapping preserves plan validity");
    (plan, snapped)
}

fn step_count(n: usize, dt: f64, horizon: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::input("time step dt must be positive"));
    }
    if ((n as f64) * dt - horizon).abs() > 1e-9 * horizon {
        return Err(Error::input(format!("path of {n} steps of {dt} does not span horizon {horizon}")));
    }
    Ok(())
}

/// Grid index from which each intervention is active.
fn activation_steps(plan: &CapacityPlan, dt: f64) -> (CapacityPlan, Vec<usize>) {
    let (snapped, moved) = snap_to_grid(plan, dt);
    if moved {
        warn!("intervention times are off the dt = {dt} grid; snapped down to grid points");
    }
    let steps = snapped
        .interventions()
        .iter()
        .map(|iv| (iv.time / dt + 1e-9).floor() as usize)
        .collect();
    (snapped, steps)
}

fn riemann<F>(plan: &CapacityPlan, n: usize, dt: f64, params: &ScenarioParams, mut residual: F) -> EmissionsResult
where
    F: FnMut(usize, &[f64]) -> f64,
{
    let (snapped, steps) = activation_steps(plan, dt);
    let mut capacity = snapped.initial_capacity().to_vec();
    let mut active = 0;
    let mut breakdown = Vec::with_capacity(steps.len() + 1);
    let mut current = Segment { start: 0.0, end: 0.0, emissions: 0.0 };
    for k in 0..n {
        while active < steps.len() && steps[active] <= k {
            if k > 0 && current.end > current.start {
                breakdown.push(current);
                current = Segment { start: k as f64 * dt, end: k as f64 * dt, emissions: 0.0 };
            }
            for (c, x) in capacity.iter_mut().zip(&snapped.interventions()[active].sizes) {
                *c += x;
            }
            active += 1;
        }
        current.emissions += rate(params, residual(k, &capacity)) * dt;
        current.end = (k + 1) as f64 * dt;
    }
    breakdown.push(current);
    EmissionsResult { total: breakdown.iter().map(|s| s.emissions).sum(), breakdown }
}

/// Left-endpoint Riemann sum of the emission rate along sampled paths.
///
/// `demand[k]` and `capacity_factor[k]` are the values at `k·dt`; the paths
/// must span the horizon exactly. Off-grid interventions are snapped down.
pub fn accumulated_emissions_path(
    plan: &CapacityPlan,
    demand: &[f64],
    capacity_factor: &[f64],
    params: &ScenarioParams,
    dt: f64,
) -> Result<EmissionsResult> {
    if demand.len() != capacity_factor.len() {
        return Err(Error::input(format!(
            "demand path has {} points, capacity-factor path {}",
            demand.len(),
            capacity_factor.len()
        )));
    }
    step_count(demand.len(), dt, params.horizon)?;
    Ok(riemann(plan, demand.len(), dt, params, |k, cap| {
        demand[k] - cap.iter().sum::<f64>() * capacity_factor[k]
    }))
}

/// As [`accumulated_emissions_path`] with one capacity-factor path per technology.
pub fn accumulated_emissions_path_multi(
    plan: &CapacityPlan,
    demand: &[f64],
    capacity_factors: &[Vec<f64>],
    params: &ScenarioParams,
    dt: f64,
) -> Result<EmissionsResult> {
    if capacity_factors.len() != plan.technologies() {
        return Err(Error::input(format!(
            "{} capacity-factor paths for {} technologies",
            capacity_factors.len(),
            plan.technologies()
        )));
    }
    if capacity_factors.iter().any(|p| p.len() != demand.len()) {
        return Err(Error::input("capacity-factor paths must match the demand path length"));
    }
    step_count(demand.len(), dt, params.horizon)?;
    Ok(riemann(plan, demand.len(), dt, params, |k, cap| {
        demand[k] - cap.iter().zip(capacity_factors).map(|(c, v)| c * v[k]).sum::<f64>()
    }))
}

/// `(∂E/∂t, ∂E/∂ξ)` for one intervention with constant `d`, `v`.
pub fn emissions_partials(t: f64, xi: f64, demand: f64, capacity_factor: f64, params: &ScenarioParams) -> (f64, f64) {
    let d_dt = params.e_f * demand.min(xi * capacity_factor);
    let d_dxi = if demand - xi * capacity_factor > 0.0 {
        -params.e_f * (params.horizon - t) * capacity_factor
    } else {
        0.0
    };
    (d_dt, d_dxi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub n_paths: usize,
    pub dt: f64,
    pub mean: f64,
    pub std_dev: f64,
    /// Fraction of paths with `E(T) > L`.
    pub violation_prob: f64,
    pub violation_std_error: f64,
}

/// `E(T)` along `n_paths` simulated paths where `D` and `V` are redrawn
/// independently at every step. Path `i` draws from substream `i / CHUNK`.
pub fn simulate_path_totals(
    plan: &CapacityPlan,
    params: &ScenarioParams,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    params.validate()?;
    plan.validate_horizon(params.horizon)?;
    if n_paths == 0 {
        return Err(Error::param("need at least one path"));
    }
    let steps = (params.horizon / dt).round() as usize;
    step_count(steps, dt, params.horizon)?;
    let (snapped, _) = activation_steps(plan, dt);
    let root = par::derive_seed(seed, tags::PATHS);
    let totals = par::map_chunks(n_paths, |c, range| {
        let mut rng = par::substream(root, c as u64);
        let mut d = vec![0.0; steps];
        let mut v = vec![0.0; steps];
        range
            .map(|_| {
                for k in 0..steps {
                    d[k] = params.demand.draw(&mut rng);
                    v[k] = params.capacity_factor.draw(&mut rng);
                }
                riemann(&snapped, steps, dt, params, |k, cap| d[k] - cap.iter().sum::<f64>() * v[k]).total
            })
            .collect::<Vec<_>>()
    });
    Ok(totals.concat())
}

impl PathSummary {
    pub fn from_totals(totals: &[f64], dt: f64, target: f64) -> Self {
        let n = totals.len() as f64;
        let mean = totals.iter().sum::<f64>() / n;
        let var = if totals.len() > 1 {
            totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let p = totals.iter().filter(|&&x| x > target).count() as f64 / n;
        PathSummary {
            n_paths: totals.len(),
            dt,
            mean,
            std_dev: var.sqrt(),
            violation_prob: p,
            violation_std_error: (p * (1.0 - p) / n).sqrt(),
        }
    }
}
