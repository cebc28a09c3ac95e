//! Random variables for demand and capacity factor, seeded sampling, and the
//! ε-upper quantile of the constraint variable `(T·D − L/e_F)/V`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Seed tags for the independent roles a scenario draws from.
pub(crate) mod tags {
    pub const DEMAND: u64 = 0xD;
    pub const CAPACITY_FACTOR: u64 = 0xCF;
    pub const VERIFY: u64 = 0x7E;
    pub const FEASIBILITY: u64 = 0xFE;
    pub const BISECTION: u64 = 0xB1;
    pub const OBJECTIVE: u64 = 0x0B;
    pub const PATHS: u64 = 0x9A;
}

/// Time-independent distribution of demand `D` (GW) or capacity factor `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RandomVariable {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Resampled with replacement; values are kept sorted ascending.
    Empirical { values: Vec<f64> },
}

impl RandomVariable {
    pub fn constant(value: f64) -> Result<Self> {
        let rv = RandomVariable::Constant { value };
        rv.validate()?;
        Ok(rv)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let rv = RandomVariable::Uniform { lo, hi };
        rv.validate()?;
        Ok(rv)
    }

    pub fn empirical(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("empirical values must be finite"));
        }
        values.sort_unstable_by(f64::total_cmp);
        let rv = RandomVariable::Empirical { values };
        rv.validate()?;
        Ok(rv)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RandomVariable::Constant { value } if !value.is_finite() => {
                Err(Error::param(format!("constant value {value} is not finite")))
            }
            RandomVariable::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(Error::param(format!("uniform bounds must satisfy lo < hi, got [{lo}, {hi}]")))
            }
            RandomVariable::Empirical { values } if values.is_empty() => {
                Err(Error::param("empirical distribution needs at least one value"))
            }
            RandomVariable::Empirical { values }
                if values.iter().any(|v| !v.is_finite())
                    || values.windows(2).any(|w| w[0] > w[1]) =>
            {
                Err(Error::param("empirical values must be finite and sorted ascending"))
            }
            _ => Ok(()),
        }
    }

    /// Extra checks for a capacity factor: support inside [0, 1].
    pub fn validate_capacity_factor(&self) -> Result<()> {
        self.validate()?;
        let (lo, hi) = self.support();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::param(format!(
                "capacity factor support [{lo}, {hi}] must lie within [0, 1]"
            )));
        }
        Ok(())
    }

    /// Smallest and largest attainable values.
    pub fn support(&self) -> (f64, f64) {
        match self {
            RandomVariable::Constant { value } => (*value, *value),
            RandomVariable::Uniform { lo, hi } => (*lo, *hi),
            RandomVariable::Empirical { values } => (values[0], values[values.len() - 1]),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            RandomVariable::Constant { value } => *value,
            RandomVariable::Uniform { lo, hi } => 0.5 * (lo + hi),
            RandomVariable::Empirical { values } => values.iter().sum::<f64>() / values.len() as f64,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            RandomVariable::Constant { value } => *value,
            RandomVariable::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            RandomVariable::Empirical { values } => values[rng.random_range(0..values.len())],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub seed: u64,
    pub count: usize,
}

/// Draws `n` independent values. Chunk `c` of the output always comes from
/// substream `c` of `seed`, so the batch does not depend on thread count.
pub fn sample(rv: &RandomVariable, seed: u64, n: usize) -> Result<SampleBatch> {
    rv.validate()?;
    if n == 0 {
        return Err(Error::param("sample count must be positive"));
    }
    let values = par::map_chunks(n, |c, range| {
        let mut rng = par::substream(seed, c as u64);
        range.map(|_| rv.draw(&mut rng)).collect::<Vec<_>>()
    })
    .concat();
    Ok(SampleBatch { values, seed, count: n })
}

/// Independent demand and capacity-factor draws for one scenario seed.
pub fn sample_pair(
    demand: &RandomVariable,
    capacity_factor: &RandomVariable,
    seed: u64,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = sample(demand, par::derive_seed(seed, tags::DEMAND), n)?;
    let v = sample(capacity_factor, par::derive_seed(seed, tags::CAPACITY_FACTOR), n)?;
    Ok((d.values, v.values))
}

/// Draws of `(T·D − L/e_F)/V`. A zero capacity factor maps to ±∞.
pub fn constraint_samples(
    demand: &RandomVariable,
    capacity_factor: &RandomVariable,
    horizon: f64,
    target: f64,
    e_f: f64,
    seed: u64,
    n: usize,
) -> Result<Vec<f64>> {
    let (d, v) = sample_pair(demand, capacity_factor, seed, n)?;
    let offset = target / e_f;
    Ok(d.iter()
        .zip(&v)
        .map(|(&d, &v)| {
            let num = horizon * d - offset;
            if v == 0.0 {
                if num >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY }
            } else {
                num / v
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileMethod {
    MonteCarlo,
    QuadratureOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileResult {
    /// GW·years when the variable is the constraint variable.
    pub z: f64,
    pub epsilon: f64,
    pub method: QuantileMethod,
    pub ci_halfwidth: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("epsilon must lie in (0,1), got {epsilon}")))
    }
}

/// Number of samples allowed strictly above the ε-upper quantile.
fn exceedance_budget(epsilon: f64, n: usize) -> usize {
    // Guard against ε·n landing a hair under an integer.
    let m = (epsilon * n as f64 * (1.0 + 1e-12)).floor() as usize;
    m.min(n - 1)
}

/// Empirical ε-upper quantile.
///
/// Returns the smallest sample value `z` whose strict-exceedance fraction
/// `#{x > z}/n` is at most ε. The half-width is that of the distribution-free
/// order-statistic interval at the 95% level, `(x_(j+) − x_(j−))/2` with the
/// tail probabilities `ε ± 1.96·sqrt(ε(1−ε)/n)`.
pub fn upper_quantile_mc(samples: &[f64], epsilon: f64) -> Result<QuantileResult> {
    if samples.is_empty() {
        return Err(Error::input("cannot take a quantile of an empty sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::input("samples contain NaN"));
    }
    check_epsilon(epsilon)?;
    let mut sorted = samples.to_vec();
    par::sort(&mut sorted);
    upper_quantile_sorted(&sorted, epsilon)
}

/// As [`upper_quantile_mc`] for samples already sorted ascending.
pub fn upper_quantile_sorted(sorted: &[f64], epsilon: f64) -> Result<QuantileResult> {
    check_epsilon(epsilon)?;
    let n = sorted.len();
    if n == 0 {
        return Err(Error::input("cannot take a quantile of an empty sample"));
    }
    let z = sorted[n - 1 - exceedance_budget(epsilon, n)];
    if !z.is_finite() {
        return Err(Error::Numerical(format!(
            "empirical {epsilon}-upper quantile is not finite; the capacity-factor support probably reaches 0"
        )));
    }
    let delta = 1.96 * (epsilon * (1.0 - epsilon) / n as f64).sqrt();
    let index_at = |p: f64| n - 1 - (p.clamp(0.0, 1.0) * n as f64).floor().min((n - 1) as f64) as usize;
    let lo = sorted[index_at(epsilon + delta)];
    let hi = sorted[index_at(epsilon - delta)];
    let ci_halfwidth = if n > 1 && lo.is_finite() && hi.is_finite() { 0.5 * (hi - lo) } else { 0.0 };
    Ok(QuantileResult { z, epsilon, method: QuantileMethod::MonteCarlo, ci_halfwidth })
}

/// Exact tail `P((T·D − L/e_F)/V > z)` for independent constant-or-uniform
/// `D` and `V`, valid for `z ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintTail {
    demand: (f64, f64),
    capacity_factor: (f64, f64),
    horizon: f64,
    offset: f64,
}

impl ConstraintTail {
    pub fn new(
        demand: &RandomVariable,
        capacity_factor: &RandomVariable,
        horizon: f64,
        target: f64,
        e_f: f64,
    ) -> Result<Self> {
        demand.validate()?;
        capacity_factor.validate()?;
        let support = |rv: &RandomVariable, name: &str| match rv {
            RandomVariable::Empirical { .. } => Err(Error::param(format!(
                "quadrature oracle needs a uniform or constant {name}"
            ))),
            other => Ok(other.support()),
        };
        let demand = support(demand, "demand")?;
        let capacity_factor = support(capacity_factor, "capacity factor")?;
        if capacity_factor.0 < 0.0 || capacity_factor.1 <= 0.0 {
            return Err(Error::param("capacity factor support must lie in [0, ∞) and not be {0}"));
        }
        if !(horizon > 0.0 && e_f > 0.0 && target.is_finite()) {
            return Err(Error::param("oracle needs T > 0, e_F > 0 and finite L"));
        }
        Ok(Self { demand, capacity_factor, horizon, offset: target / e_f })
    }

    /// `P(D > q)`.
    fn demand_exceeds(&self, q: f64) -> f64 {
        let (a, b) = self.demand;
        if a == b {
            if a > q { 1.0 } else { 0.0 }
        } else {
            ((b - q) / (b - a)).clamp(0.0, 1.0)
        }
    }

    pub fn prob(&self, z: f64) -> f64 {
        debug_assert!(z >= 0.0);
        let (c, h) = self.capacity_factor;
        let threshold = |v: f64| (z * v + self.offset) / self.horizon;
        if c == h || z == 0.0 {
            return self.demand_exceeds(threshold(c));
        }
        let (a, b) = self.demand;
        if a == b {
            // Indicator of v < (T·d − L/e_F)/z.
            let cut = ((self.horizon * a - self.offset) / z).clamp(c, h);
            return (cut - c) / (h - c);
        }
        // P(D > q(v)) is piecewise linear in v with kinks where q(v) hits a or b,
        // so trapezoids between kinks integrate it exactly.
        let mut knots = vec![c, h];
        for edge in [a, b] {
            let v = (self.horizon * edge - self.offset) / z;
            if v > c && v < h {
                knots.push(v);
            }
        }
        knots.sort_unstable_by(f64::total_cmp);
        let area: f64 = knots
            .windows(2)
            .map(|w| {
                0.5 * (w[1] - w[0]) * (self.demand_exceeds(threshold(w[0])) + self.demand_exceeds(threshold(w[1])))
            })
            .sum();
        area / (h - c)
    }
}

/// Quadrature oracle for the ε-upper quantile of `(T·D − L/e_F)/V`.
///
/// Brackets the root on `[0, z_hi]`, doubling `z_hi` from 1 until the tail
/// drops below ε (at most 60 doublings), then bisects to relative width 1e-14.
/// With atoms (constant `D` or `V`) this converges to `inf{z : tail(z) ≤ ε}`.
pub fn z_epsilon_oracle(
    demand: &RandomVariable,
    capacity_factor: &RandomVariable,
    horizon: f64,
    target: f64,
    e_f: f64,
    epsilon: f64,
) -> Result<QuantileResult> {
    check_epsilon(epsilon)?;
    let tail = ConstraintTail::new(demand, capacity_factor, horizon, target, e_f)?;
    let at_zero = tail.prob(0.0);
    if at_zero <= epsilon {
        return Err(Error::infeasible(format!(
            "P((T·D − L/e_F)/V > 0) = {at_zero} ≤ ε = {epsilon}: no positive quantile; attainable tail range on z ≥ 0 is [0, {at_zero}]"
        )));
    }
    let mut hi = 1.0_f64;
    let mut doublings = 0;
    while tail.prob(hi) >= epsilon {
        if doublings == 60 {
            return Err(Error::infeasible(format!(
                "tail stays above ε = {epsilon} up to z = {hi}; attainable tail range is [{}, {at_zero}]",
                tail.prob(hi)
            )));
        }
        hi *= 2.0;
        doublings += 1;
    }
    let mut lo = 0.0_f64;
    for _ in 0..300 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if tail.prob(mid) > epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(QuantileResult {
        z: 0.5 * (lo + hi),
        epsilon,
        method: QuantileMethod::QuadratureOracle,
        ci_halfwidth: 0.0,
    })
}
