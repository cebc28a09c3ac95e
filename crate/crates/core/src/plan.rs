//! Capacity plans (the control) and scenario parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::RandomVariable;

/// Capacity added at one time, one entry per renewable technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub time: f64,
    pub sizes: Vec<f64>,
}

impl Intervention {
    /// Size for a single-technology plan.
    pub fn size(&self) -> f64 {
        debug_assert_eq!(self.sizes.len(), 1);
        self.sizes[0]
    }

    pub fn total(&self) -> f64 {
        self.sizes.iter().sum()
    }
}

/// Installed renewable capacity `C_R(t) = C_R(0⁻) + Σ_{tᵢ ≤ t} ξᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityPlan {
    initial_capacity: Vec<f64>,
    interventions: Vec<Intervention>,
}

impl CapacityPlan {
    /// Single-technology plan from `(time, size)` pairs.
    pub fn new(initial_capacity: f64, interventions: &[(f64, f64)]) -> Result<Self> {
        Self::multi(
            vec![initial_capacity],
            interventions.iter().map(|&(t, xi)| (t, vec![xi])).collect(),
        )
    }

    /// No installed and no planned capacity (the do-nothing plan).
    pub fn empty() -> Self {
        CapacityPlan { initial_capacity: vec![0.0], interventions: Vec::new() }
    }

    /// Plan over `initial_capacity.len()` technologies.
    pub fn multi(initial_capacity: Vec<f64>, interventions: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let plan = CapacityPlan {
            initial_capacity,
            interventions: interventions
                .into_iter()
                .map(|(time, sizes)| Intervention { time, sizes })
                .collect(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.initial_capacity.len();
        if d == 0 {
            return Err(Error::param("a plan needs at least one technology"));
        }
        if self.initial_capacity.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::param("initial capacity must be finite and nonnegative"));
        }
        for iv in &self.interventions {
            if !(iv.time.is_finite() && iv.time >= 0.0) {
                return Err(Error::param(format!("intervention time {} must be finite and ≥ 0", iv.time)));
            }
            if iv.sizes.len() != d {
                return Err(Error::param(format!(
                    "intervention at t={} has {} sizes, plan has {d} technologies",
                    iv.time,
                    iv.sizes.len()
                )));
            }
            if iv.sizes.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || iv.total() <= 0.0 {
                return Err(Error::param(format!(
                    "intervention at t={} must add positive capacity",
                    iv.time
                )));
            }
        }
        if self.interventions.windows(2).any(|w| w[0].time >= w[1].time) {
            return Err(Error::param("intervention times must be strictly increasing"));
        }
        Ok(())
    }

    /// Checks every intervention falls within `[0, horizon]`.
    pub fn validate_horizon(&self, horizon: f64) -> Result<()> {
        match self.interventions.iter().find(|iv| iv.time > horizon) {
            Some(iv) => Err(Error::param(format!("intervention time {} exceeds horizon {horizon}", iv.time))),
            None => Ok(()),
        }
    }

    pub fn technologies(&self) -> usize {
        self.initial_capacity.len()
    }

    pub fn initial_capacity(&self) -> &[f64] {
        &self.initial_capacity
    }

    pub fn interventions(&self) -> &[Intervention] {
        &self.interventions
    }

    pub fn is_empty(&self) -> bool {
        self.interventions.is_empty()
    }

    /// `(time, size)` pairs; fails for multi-technology plans.
    pub fn single_technology(&self) -> Result<Vec<(f64, f64)>> {
        if self.technologies() != 1 {
            return Err(Error::param(format!(
                "closed forms aggregate renewables into one technology; plan has {}",
                self.technologies()
            )));
        }
        Ok(self.interventions.iter().map(|iv| (iv.time, iv.size())).collect())
    }

    /// Capacity per technology at time `t`, counting interventions with `tᵢ ≤ t`.
    pub fn capacity_at(&self, t: f64) -> Vec<f64> {
        let mut cap = self.initial_capacity.clone();
        for iv in self.interventions.iter().take_while(|iv| iv.time <= t) {
            for (c, x) in cap.iter_mut().zip(&iv.sizes) {
                *c += x;
            }
        }
        cap
    }

    /// Capacity summed over technologies at time `t`.
    pub fn total_capacity_at(&self, t: f64) -> f64 {
        self.initial_capacity.iter().sum::<f64>()
            + self.interventions.iter().take_while(|iv| iv.time <= t).map(Intervention::total).sum::<f64>()
    }

    /// Capacity summed over technologies once every intervention is in place.
    pub fn final_capacity(&self) -> f64 {
        self.total_capacity_at(f64::INFINITY)
    }

    /// `∫₀ᵀ C_R(t) dt`, summed over technologies.
    pub fn capacity_years(&self, horizon: f64) -> f64 {
        self.initial_capacity.iter().sum::<f64>() * horizon
            + self
                .interventions
                .iter()
                .map(|iv| iv.total() * (horizon - iv.time).max(0.0))
                .sum::<f64>()
    }

    /// Same plan with every intervention delayed by `shift`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        let mut plan = self.clone();
        for iv in &mut plan.interventions {
            iv.time += shift;
        }
        plan.validate()?;
        Ok(plan)
    }
}

/// Economic, physical and stochastic inputs of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// `T`, years.
    pub horizon: f64,
    /// `ρ`, 1/years.
    pub rho: f64,
    /// `κ`, cost per GW at t = 0.
    pub kappa: f64,
    /// `K_f`, fixed cost per intervention.
    pub fixed_cost: f64,
    /// `e_F`, tons CO₂ per GW per year of fossil production.
    pub e_f: f64,
    /// `e_I`, tons CO₂ per GW per year of imports.
    pub e_i: f64,
    /// `C_F`, GW.
    pub fossil_capacity: f64,
    /// `L`, tons CO₂.
    pub target: f64,
    pub epsilon: f64,
    /// `ξ_M`, GW per intervention.
    pub xi_max: f64,
    pub demand: RandomVariable,
    pub capacity_factor: RandomVariable,
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &str); 10] = [
            (self.horizon > 0.0 && self.horizon.is_finite(), "horizon T must be positive"),
            (self.rho >= 0.0 && self.rho.is_finite(), "discount rate rho must be nonnegative"),
            (self.kappa > 0.0 && self.kappa.is_finite(), "kappa must be positive"),
            (self.fixed_cost >= 0.0 && self.fixed_cost.is_finite(), "fixed cost K_f must be nonnegative"),
            (self.e_f > 0.0 && self.e_f.is_finite(), "e_F must be positive"),
            (self.e_i >= 0.0 && self.e_i.is_finite(), "e_I must be nonnegative"),
            (self.fossil_capacity >= 0.0 && !self.fossil_capacity.is_nan(), "fossil capacity C_F must be nonnegative"),
            (self.target > 0.0 && self.target.is_finite(), "emission target L must be positive"),
            (self.epsilon > 0.0 && self.epsilon < 1.0, "epsilon must lie in (0,1)"),
            (self.xi_max > 0.0 && self.xi_max.is_finite(), "xi_M must be positive"),
        ];
        if let Some((_, msg)) = checks.iter().find(|(ok, _)| !ok) {
            return Err(Error::param(*msg));
        }
        self.demand.validate()?;
        self.capacity_factor.validate_capacity_factor()
    }

    /// `L/e_F`: fossil GW·years the target allows.
    pub fn target_energy(&self) -> f64 {
        self.target / self.e_f
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        ScenarioParams { rho, ..self.clone() }
    }
}
