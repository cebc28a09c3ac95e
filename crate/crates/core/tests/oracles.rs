use capex::analytic::{solve_one_intervention, Regime};
use capex::numeric::{grid_search_n, grid_search_one, verify_constraint, GridSpec};
use capex::plan::ScenarioParams;
use capex::stochastic::{constraint_samples, upper_quantile_mc, z_epsilon_oracle};
use capex::{CapacityPlan, RandomVariable};
use proptest::prelude::*;

fn params(rho: f64, horizon: f64, xi_max: f64) -> ScenarioParams {
    ScenarioParams {
        horizon,
        rho,
        kappa: 1.0,
        fixed_cost: 0.0,
        e_f: 0.7,
        e_i: 0.0,
        fossil_capacity: 2000.0,
        target: 2700.0,
        epsilon: 0.2,
        xi_max,
        demand: RandomVariable::uniform(1000.0, 1500.0).unwrap(),
        capacity_factor: RandomVariable::uniform(0.5, 1.0).unwrap(),
    }
}

/// Interior scenarios: 1/T ≤ ρ ≤ ξ_M/z.
fn interior() -> impl Strategy<Value = (ScenarioParams, f64)> {
    (10.0f64..50.0, 500.0f64..2000.0, 0.05f64..0.9, 0.0f64..1.0).prop_map(|(t, xi_max, frac, s)| {
        let z = frac * t * xi_max;
        let (lo, hi) = (1.0 / t, xi_max / z);
        (params(lo + s * (hi - lo), t, xi_max), z)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grid_matches_analytic_in_interior((p, z) in interior()) {
        let grid = GridSpec { t_points: 3001, xi_points: 2 };
        let a = solve_one_intervention(z, &p).unwrap();
        let g = grid_search_one(z, &p, &grid).unwrap();
        let step = grid.t_step(p.horizon);
        prop_assert!(a.regime == Regime::Interior);
        prop_assert!((g.time() - a.time()).abs() <= step * (1.0 + 1e-9));
        prop_assert!((g.cost - a.cost) / a.cost <= 10.0 * step * p.rho);
        prop_assert!(g.cost >= a.cost * (1.0 - 1e-12));
    }

    #[test]
    fn refining_the_grid_never_raises_the_minimum((p, z) in interior(), k in 20usize..200) {
        let coarse = GridSpec { t_points: k + 1, xi_points: 2 };
        let fine = GridSpec { t_points: 2 * k + 1, xi_points: 2 };
        let c = grid_search_one(z, &p, &coarse).unwrap().cost;
        let f = grid_search_one(z, &p, &fine).unwrap().cost;
        prop_assert!(f <= c);
    }

    #[test]
    fn two_interventions_never_beat_the_continuous_optimum((p, z) in interior()) {
        let grid = GridSpec { t_points: 61, xi_points: 10 };
        // a capped split across the grid points around T − 1/ρ can beat the best
        // single grid point, but never the continuous optimum
        let best = solve_one_intervention(z, &p).unwrap().cost;
        let one = grid_search_n(z, 1, &p, &grid).unwrap();
        let two = grid_search_n(z, 2, &p, &grid).unwrap();
        prop_assert!(two.cost >= best * (1.0 - 1e-12));
        prop_assert!(two.cost <= one.cost);
    }
}

#[test]
fn cost_non_increasing_in_n_on_nested_grids() {
    // the ξ_M corner, where splitting pays off
    let p = params(0.2, 30.0, 1000.0);
    let grid = GridSpec { t_points: 31, xi_points: 10 };
    let costs: Vec<f64> = (1..=4).map(|n| grid_search_n(6000.0, n, &p, &grid).unwrap().cost).collect();
    assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");
    assert!(costs[1] < costs[0]);
    assert_eq!(grid_search_n(6000.0, 1, &p, &grid).unwrap(), grid_search_one(6000.0, &p, &grid).unwrap());
}

#[test]
fn golden_quantiles() {
    let u = |a, b| RandomVariable::uniform(a, b).unwrap();
    let d = u(1000.0, 1500.0);
    // reference values from an independent adaptive-quadrature root find
    for (v, target, golden) in [
        (u(0.5, 1.0), 2700.0, 56_294.644_103_105_966),
        (u(0.5, 1.0), 13125.0, 32_693.024_198_872_12),
        (u(0.0, 1.0), 2700.0, 168_214.285_714_285_7),
        (u(0.01, 1.0), 2700.0, 161_744.505_494_505_5),
    ] {
        let z = z_epsilon_oracle(&d, &v, 30.0, target, 0.7, 0.2).unwrap().z;
        assert!((z / golden - 1.0).abs() < 1e-9, "{z} vs {golden}");
    }
    let samples = constraint_samples(&d, &u(0.5, 1.0), 30.0, 2700.0, 0.7, 3, 1_000_000).unwrap();
    let mc = upper_quantile_mc(&samples, 0.2).unwrap();
    assert!((mc.z - 56_294.644_103_105_966).abs() <= 3.0 * mc.ci_halfwidth);
}

#[test]
fn verification_is_seed_deterministic() {
    let p = ScenarioParams { target: 13125.0, ..params(0.05, 30.0, 2000.0) };
    let plan = CapacityPlan::new(0.0, &[(10.0, 1634.65)]).unwrap();
    let a = verify_constraint(&plan, &p, 100_000, 4).unwrap();
    assert_eq!(a, verify_constraint(&plan, &p, 100_000, 4).unwrap());
    assert_ne!(a.estimated_prob, verify_constraint(&plan, &p, 100_000, 5).unwrap().estimated_prob);
}
