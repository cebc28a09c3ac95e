//! Cost-minimal timing and sizing of renewable capacity expansion under a
//! chance constraint on accumulated CO₂ emissions.
//!
//! The closed-form optimal plans live in [`analytic`]; [`numeric`] holds the
//! brute-force grid searches and Monte Carlo constraint checks used to verify
//! them. [`scenario`] wires everything into a configuration-driven pipeline.

pub mod error;
pub mod par;
pub mod plan;
pub mod stochastic;
pub mod energy;
pub mod cost;
pub mod feasibility;
pub mod analytic;
pub mod numeric;
pub mod scenario;

pub use error::{Error, Result};
pub use plan::{CapacityPlan, Intervention, ScenarioParams};
pub use stochastic::{QuantileMethod, QuantileResult, RandomVariable, SampleBatch};
