//! Epidemic policy toolkit.
//!
//! - [`data`]: case-count CSV ingestion and log-cumulative regression series
//! - [`seird`]: deterministic SEIRD dynamics with ICU-dependent mortality
//! - [`changepoint`]: piecewise-linear change-point model and policy efficiency
//! - [`inference`]: SEIRD parameter inference from case and death counts
//! - [`policy`]: intervention catalog, schedules and reproduction-number composition
//! - [`econ`]: dollar loss accounting
//! - [`scenario`]: end-to-end scenario runs and exhaustive schedule search
//!
//! The simulation modules are generic over [`Real`]; the aliases below fix
//! the scalar to `f64`, which is what the inference code and the service use.

pub mod changepoint;
pub mod data;
pub mod econ;
pub mod inference;
pub mod num;
pub mod policy;
pub mod scenario;
pub mod seird;
pub mod stats;

pub use num::Real;

pub type SeirdParams = seird::SeirdParams<f64>;
pub type SeirdState = seird::SeirdState<f64>;
pub type Flows = seird::Flows<f64>;
pub type IcuModel = seird::IcuModel<f64>;
pub type Trajectory = seird::Trajectory<f64>;
pub type PolicyDef = policy::PolicyDef<f64>;
pub type Catalog = policy::Catalog<f64>;
pub type EconParams = econ::EconParams<f64>;
pub type DailyLoss = econ::DailyLoss<f64>;
pub type LossBreakdown = econ::LossBreakdown<f64>;
pub type Scenario = scenario::Scenario<f64>;
pub type ScenarioResult = scenario::ScenarioResult<f64>;
pub type ScenarioSummary = scenario::ScenarioSummary<f64>;
