//! Installation, operational and emission-penalty costs.

use serde::{Deserialize, Serialize};

use crate::energy::emissions_total;
use crate::error::{Error, Result};
use crate::par;
use crate::plan::{CapacityPlan, ScenarioParams};
use crate::stochastic::{sample_pair, tags};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub installation: f64,
    pub operational: f64,
    pub penalty: f64,
    pub total: f64,
}

/// Present value of the interventions: `Σᵢ (K_f·1(ξᵢ>0) + κ·ξᵢ)·e^{−ρtᵢ}`.
pub fn installation_cost(plan: &CapacityPlan, params: &ScenarioParams) -> f64 {
    plan.interventions()
        .iter()
        .map(|iv| {
            let fixed = if iv.total() > 0.0 { params.fixed_cost } else { 0.0 };
            (fixed + params.kappa * iv.total()) * (-params.rho * iv.time).exp()
        })
        .sum()
}

/// Penalty `g` on accumulated emissions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySpec {
    None,
    /// `λ·max(0, x − threshold)^power`; threshold defaults to `L`.
    Polynomial { lambda: f64, threshold: Option<f64>, power: u32 },
    /// `λ·(1(x > threshold) − ε)`, the multiplier form of the chance constraint.
    Lagrange { lambda: f64, threshold: Option<f64>, epsilon: Option<f64> },
}

impl PenaltySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PenaltySpec::None => Ok(()),
            PenaltySpec::Polynomial { lambda, power, threshold } => {
                if !(lambda >= 0.0 && lambda.is_finite()) || power == 0 || threshold.is_some_and(|t| !t.is_finite()) {
                    Err(Error::param("polynomial penalty needs λ ≥ 0, power ≥ 1 and a finite threshold"))
                } else {
                    Ok(())
                }
            }
            PenaltySpec::Lagrange { lambda, epsilon, threshold } => {
                if !(lambda >= 0.0 && lambda.is_finite())
                    || epsilon.is_some_and(|e| !(e > 0.0 && e < 1.0))
                    || threshold.is_some_and(|t| !t.is_finite())
                {
                    Err(Error::param("Lagrange penalty needs λ ≥ 0, ε in (0,1) and a finite threshold"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn eval(&self, emissions: f64, params: &ScenarioParams) -> f64 {
        match *self {
            PenaltySpec::None => 0.0,
            PenaltySpec::Polynomial { lambda, threshold, power } => {
                let excess = (emissions - threshold.unwrap_or(params.target)).max(0.0);
                lambda * excess.powi(power as i32)
            }
            PenaltySpec::Lagrange { lambda, threshold, epsilon } => {
                let hit = if emissions > threshold.unwrap_or(params.target) { 1.0 } else { 0.0 };
                lambda * (hit - epsilon.unwrap_or(params.epsilon))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
}

/// Expected penalty-form objective: installation + `∫ f(C_R)` + `E[g(E(T))]`,
/// with linear operational cost `f(c) = f_coeff·c`.
pub fn objective_penalty_form(
    plan: &CapacityPlan,
    params: &ScenarioParams,
    f_coeff: f64,
    penalty: &PenaltySpec,
    mc: McConfig,
) -> Result<CostBreakdown> {
    params.validate()?;
    penalty.validate()?;
    if !(f_coeff >= 0.0 && f_coeff.is_finite()) {
        return Err(Error::param("operational cost coefficient must be nonnegative"));
    }
    let installation = installation_cost(plan, params);
    let operational = f_coeff * plan.capacity_years(params.horizon);
    let penalty = if matches!(penalty, PenaltySpec::None) {
        0.0
    } else {
        let (d, v) = sample_pair(&params.demand, &params.capacity_factor, par::derive_seed(mc.seed, tags::OBJECTIVE), mc.n_samples)?;
        par::sum(mc.n_samples, |i| penalty.eval(emissions_total(plan, d[i], v[i], params), params)) / mc.n_samples as f64
    };
    Ok(CostBreakdown { installation, operational, penalty, total: installation + operational + penalty })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoNothingReport {
    /// Objective of keeping the initial capacity forever.
    pub j0: f64,
    pub k: u32,
    /// `E[E(T)^k]`.
    pub moment_k: f64,
    /// `P(E(T) > L)`.
    pub violation_prob: f64,
    pub n_samples: usize,
}

/// Do-nothing baseline with `f ≡ 0` and `g(x) = max(0, x − L)^k`.
pub fn do_nothing_report(params: &ScenarioParams, k: u32, n_samples: usize, seed: u64) -> Result<DoNothingReport> {
    let penalty = PenaltySpec::Polynomial { lambda: 1.0, threshold: None, power: k.max(1) };
    do_nothing_report_with(params, 0.0, &penalty, k, McConfig { n_samples, seed })
}

/// Do-nothing baseline under an arbitrary objective.
pub fn do_nothing_report_with(
    params: &ScenarioParams,
    f_coeff: f64,
    penalty: &PenaltySpec,
    k: u32,
    mc: McConfig,
) -> Result<DoNothingReport> {
    if k == 0 {
        return Err(Error::param("moment order k must be at least 1"));
    }
    let plan = CapacityPlan::empty();
    let j0 = objective_penalty_form(&plan, params, f_coeff, penalty, mc)?.total;
    let (d, v) = sample_pair(&params.demand, &params.capacity_factor, par::derive_seed(mc.seed, tags::OBJECTIVE), mc.n_samples)?;
    let n = mc.n_samples as f64;
    let moment_k = par::sum(mc.n_samples, |i| emissions_total(&plan, d[i], v[i], params).powi(k as i32)) / n;
    let violations = par::count(mc.n_samples, |i| emissions_total(&plan, d[i], v[i], params) > params.target);
    Ok(DoNothingReport { j0, k, moment_k, violation_prob: violations as f64 / n, n_samples: mc.n_samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::RandomVariable;
    use proptest::prelude::*;

    fn params(demand: RandomVariable) -> ScenarioParams {
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
            capacity_factor: RandomVariable::constant(0.5).unwrap(),
        }
    }

    fn constant() -> ScenarioParams {
        params(RandomVariable::constant(1250.0).unwrap())
    }

    const MC: McConfig = McConfig { n_samples: 1000, seed: 3 };

    #[test]
    fn installation_examples() {
        let p = constant();
        let plan = CapacityPlan::new(0.0, &[(10.0, 300.0)]).unwrap();
        assert!((installation_cost(&plan, &p) - 300.0 * (-0.5f64).exp()).abs() < 1e-12);
        assert!((installation_cost(&plan, &p) - 181.959).abs() < 1e-3);
        assert_eq!(installation_cost(&CapacityPlan::empty(), &p), 0.0);
        let at_zero = CapacityPlan::new(0.0, &[(0.0, 200.0)]).unwrap();
        assert_eq!(installation_cost(&at_zero, &p.with_rho(0.37)), 200.0);
        let with_fixed = ScenarioParams { fixed_cost: 50.0, ..p };
        assert!((installation_cost(&plan, &with_fixed) - 350.0 * (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn identity_penalty_on_do_nothing() {
        let p = constant();
        let g = PenaltySpec::Polynomial { lambda: 1.0, threshold: Some(0.0), power: 1 };
        let c = objective_penalty_form(&CapacityPlan::empty(), &p, 0.0, &g, MC).unwrap();
        assert!((c.penalty - 0.7 * 30.0 * 1250.0).abs() < 1e-9);
        assert_eq!(c.total, c.penalty);
    }

    #[test]
    fn operational_cost_of_zero_capacity() {
        let c = objective_penalty_form(&CapacityPlan::empty(), &constant(), 3.0, &PenaltySpec::None, MC).unwrap();
        assert_eq!(c.total, 0.0);
        let plan = CapacityPlan::new(0.0, &[(10.0, 300.0)]).unwrap();
        let c = objective_penalty_form(&plan, &constant(), 2.0, &PenaltySpec::None, MC).unwrap();
        assert!((c.operational - 2.0 * 300.0 * 20.0).abs() < 1e-9);
        assert!((c.total - c.installation - c.operational - c.penalty).abs() <= 1e-9 * c.total);
    }

    #[test]
    fn invalid_penalties() {
        let p = constant();
        let plan = CapacityPlan::empty();
        for bad in [
            PenaltySpec::Polynomial { lambda: -1.0, threshold: None, power: 1 },
            PenaltySpec::Polynomial { lambda: 1.0, threshold: None, power: 0 },
            PenaltySpec::Lagrange { lambda: 1.0, threshold: None, epsilon: Some(1.5) },
        ] {
            assert!(objective_penalty_form(&plan, &p, 0.0, &bad, MC).is_err());
        }
        assert!(objective_penalty_form(&plan, &p, -1.0, &PenaltySpec::None, MC).is_err());
    }

    #[test]
    fn lagrange_penalty_can_be_negative() {
        // deterministic emissions below L: φ = −ε everywhere
        let p = ScenarioParams { target: 1e9, ..constant() };
        let g = PenaltySpec::Lagrange { lambda: 100.0, threshold: None, epsilon: None };
        let c = objective_penalty_form(&CapacityPlan::empty(), &p, 0.0, &g, MC).unwrap();
        assert!((c.penalty + 20.0).abs() < 1e-9);
    }

    #[test]
    fn do_nothing_examples() {
        let r = do_nothing_report(&constant(), 1, 100, 0).unwrap();
        assert!((r.moment_1() - 0.7 * 30.0 * 1250.0).abs() < 1e-9);
        assert_eq!(r.violation_prob, 1.0);

        let p = params(RandomVariable::uniform(1000.0, 1500.0).unwrap());
        let r = do_nothing_report(&p, 2, 400_000, 9).unwrap();
        assert_eq!(r.violation_prob, 1.0);
        let exact = 0.49 * 900.0 * (1250.0f64.powi(2) + 500.0f64.powi(2) / 12.0);
        assert!((r.moment_k / exact - 1.0).abs() < 0.005, "{} vs {exact}", r.moment_k);
        assert!(do_nothing_report(&p, 0, 10, 0).is_err());
    }

    impl DoNothingReport {
        fn moment_1(&self) -> f64 {
            assert_eq!(self.k, 1);
            self.moment_k
        }
    }

    proptest! {
        #[test]
        fn installation_discounting(t in 0.0f64..20.0, xi in 1.0f64..1000.0, shift in 0.0f64..10.0, rho in 0.001f64..0.3) {
            let p = constant().with_rho(rho);
            let plan = CapacityPlan::new(0.0, &[(t, xi)]).unwrap();
            let base = installation_cost(&plan, &p);
            let later = installation_cost(&plan.shifted(shift).unwrap(), &p);
            prop_assert!((later - (-rho * shift).exp() * base).abs() <= 1e-12 * base);
            if shift > 1e-6 {
                prop_assert!(later < base);
            }
            let bigger = CapacityPlan::new(0.0, &[(t, xi * 1.01)]).unwrap();
            prop_assert!(installation_cost(&bigger, &p) > base);
        }
    }
}
