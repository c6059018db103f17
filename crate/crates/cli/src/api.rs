//! Requests and responses shared by the command line and the HTTP service.
//!
//! Both front ends build the same request structs and call the same
//! functions here, so a given input yields identical numbers either way.

use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use mcmc::McmcConfig;
use pandemic::changepoint::{fit_changepoint, ChangePointPosterior, FitError, FitReport};
use pandemic::data::{parse_case_csv, select_series, to_log_cumulative, CaseTable, Field, RegressionSeries, TimeSeries};
use pandemic::policy::{PolicyDef, PolicySchedule, Violation};
use pandemic::scenario::{presets, run_scenario, search_policies, ScenarioError, SearchOptions, SearchSpace};
use pandemic::{LossBreakdown, Scenario, ScenarioSummary, Trajectory};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Error)]
pub enum ApiError {
    /// Bad input; maps to HTTP 400 and exit code 1.
    #[error("{message}")]
    Invalid { message: String, violations: Vec<Violation> },
    /// Maps to HTTP 413.
    #[error("search space has {size} schedules, above the cap of {cap}")]
    TooLarge { size: u128, cap: usize },
    /// Maps to HTTP 422 and exit code 2. `report` is the unconverged result.
    #[error("chains did not converge: max R-hat {max_rhat:.4}")]
    NotConverged { max_rhat: f64, report: Box<Value> },
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn invalid(message: impl Into<String>) -> Self {
        ApiError::Invalid { message: message.into(), violations: Vec::new() }
    }

    pub fn status(&self) -> u16 {
        match self {
            ApiError::Invalid { .. } => 400,
            ApiError::TooLarge { .. } => 413,
            ApiError::NotConverged { .. } => 422,
            ApiError::Internal(_) => 500,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            ApiError::NotConverged { .. } => 2,
            _ => 1,
        }
    }

    /// JSON error body: `{"error", "message", ...}` plus kind-specific fields.
    pub fn body(&self) -> Value {
        let message = self.to_string();
        match self {
            ApiError::Invalid { violations, .. } => {
                json!({ "error": "invalid_request", "message": message, "violations": violations })
            }
            ApiError::TooLarge { size, cap } => {
                json!({ "error": "search_space_too_large", "message": message, "size": *size as f64, "cap": cap })
            }
            ApiError::NotConverged { max_rhat, report } => {
                json!({ "error": "not_converged", "message": message, "max_rhat": max_rhat, "report": report })
            }
            ApiError::Internal(_) => json!({ "error": "internal", "message": message }),
        }
    }
}

impl From<ScenarioError> for ApiError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::InvalidSchedule(violations) => {
                ApiError::Invalid { message: "invalid schedule".into(), violations }
            }
            ScenarioError::SpaceTooLarge { size, cap } => ApiError::TooLarge { size, cap },
            other => ApiError::invalid(other.to_string()),
        }
    }
}

/// Virus parameter overrides; unset fields keep the inferred defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamOverrides {
    pub r0: Option<f64>,
    /// Days; sets `gamma = 1 / recovery_time`.
    pub recovery_time: Option<f64>,
    /// Days; sets `sigma = 1 / incubation_time`.
    pub incubation_time: Option<f64>,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcuOverrides {
    pub icu_fraction: Option<f64>,
    pub icu_beds_per_capita: Option<f64>,
    pub fatality_treated: Option<f64>,
    pub fatality_untreated: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconOverrides {
    pub lockdown_gdp_frac: Option<f64>,
    pub distancing_gdp_frac: Option<f64>,
    pub masks_cost: Option<f64>,
    pub infection_cost: Option<f64>,
    pub tracing_cost: Option<f64>,
    pub death_cost: Option<f64>,
}

/// A scenario described by overrides on [`Scenario::default`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateRequest {
    pub label: Option<String>,
    pub population: Option<f64>,
    pub gdp_per_capita: Option<f64>,
    pub horizon: Option<usize>,
    pub seed_infected: Option<f64>,
    pub params: ParamOverrides,
    pub icu: IcuOverrides,
    pub econ: EconOverrides,
    pub schedule: PolicySchedule,
    /// Name of a reference schedule; cannot be combined with `schedule`.
    pub preset: Option<String>,
    /// Delay applied to every policy's effect on transmission.
    pub lag_days: Option<usize>,
    pub substeps: Option<usize>,
}

fn set(slot: &mut f64, v: Option<f64>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn duration(name: &str, days: Option<f64>) -> Result<Option<f64>, ApiError> {
    match days {
        Some(d) if !(d > 0.0 && d.is_finite()) => Err(ApiError::invalid(format!("{name} must be > 0 days"))),
        Some(d) => Ok(Some(1.0 / d)),
        None => Ok(None),
    }
}

impl SimulateRequest {
    pub fn scenario(&self) -> Result<Scenario, ApiError> {
        let mut s = Scenario::default();
        if let Some(label) = &self.label {
            s.label = label.clone();
        }
        set(&mut s.population, self.population);
        s.params.n = s.population;
        set(&mut s.econ.gdp_per_capita, self.gdp_per_capita);
        if let Some(h) = self.horizon {
            s.horizon = h;
        }
        set(&mut s.seed_infected, self.seed_infected);
        if let Some(k) = self.substeps {
            if k == 0 {
                return Err(ApiError::invalid("substeps must be >= 1"));
            }
            s.substeps = k;
        }

        let p = &self.params;
        set(&mut s.params.r0, p.r0);
        set(&mut s.params.gamma, duration("recovery_time", p.recovery_time)?);
        set(&mut s.params.sigma, duration("incubation_time", p.incubation_time)?);
        set(&mut s.params.mu, p.mu);
        set(&mut s.params.alpha, p.alpha);

        let i = &self.icu;
        set(&mut s.icu.icu_fraction, i.icu_fraction);
        set(&mut s.icu.icu_beds_per_capita, i.icu_beds_per_capita);
        set(&mut s.icu.fatality_treated, i.fatality_treated);
        set(&mut s.icu.fatality_untreated, i.fatality_untreated);

        let e = &self.econ;
        set(&mut s.econ.lockdown_gdp_frac, e.lockdown_gdp_frac);
        set(&mut s.econ.distancing_gdp_frac, e.distancing_gdp_frac);
        set(&mut s.econ.masks_cost, e.masks_cost);
        set(&mut s.econ.infection_cost, e.infection_cost);
        set(&mut s.econ.tracing_cost, e.tracing_cost);
        set(&mut s.econ.death_cost, e.death_cost);

        if let Some(lag) = self.lag_days {
            s.catalog.set_lag(lag);
        }
        s.schedule = match &self.preset {
            Some(_) if !self.schedule.blocks.is_empty() => {
                return Err(ApiError::invalid("give either a preset or a schedule, not both"))
            }
            Some(name) => preset(name, s.horizon)?,
            None => self.schedule.clone(),
        };
        if self.label.is_none() {
            s.label = self.preset.clone().unwrap_or_else(|| "custom".into());
        }
        Ok(s)
    }
}

/// One of the reference schedules for `horizon`.
pub fn preset(name: &str, horizon: usize) -> Result<PolicySchedule, ApiError> {
    presets(horizon).into_iter().find(|(n, _)| *n == name).map(|(_, s)| s).ok_or_else(|| {
        let known: Vec<&str> = presets(horizon).into_iter().map(|(n, _)| n).collect();
        ApiError::invalid(format!("unknown preset {name:?}; known: {}", known.join(", ")))
    })
}

/// Whole-run totals. Money is in dollars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub cases: f64,
    pub deaths: f64,
    pub loss: f64,
    pub policy_cost: f64,
    pub infection_cost: f64,
    pub tracing_cost: f64,
    pub death_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub label: String,
    pub trajectory: Trajectory,
    pub loss: LossBreakdown,
    pub totals: Totals,
}

pub fn simulate(req: &SimulateRequest) -> Result<SimulateResponse, ApiError> {
    let r = run_scenario(&req.scenario()?)?;
    let t = r.loss.totals;
    let totals = Totals {
        cases: r.total_cases(),
        deaths: r.total_deaths(),
        loss: r.total_loss(),
        policy_cost: t.policy,
        infection_cost: t.infection,
        tracing_cost: t.tracing,
        death_cost: t.death,
    };
    Ok(SimulateResponse { label: r.label, trajectory: r.trajectory, loss: r.loss, totals })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchRequest {
    /// Scenario every schedule is applied to; its own schedule is ignored.
    pub base: SimulateRequest,
    pub space: SearchSpace,
    /// Ranked schedules to return, default [`DEFAULT_TOP_K`].
    pub top_k: Option<usize>,
    /// Lowers the service cap on evaluated schedules.
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    /// Schedules evaluated.
    pub evaluated: usize,
    /// Best first, ties broken by schedule encoding.
    pub ranked: Vec<ScenarioSummary>,
}

/// Exhaustive search; `cap` is the most schedules the caller allows.
pub fn search(req: &SearchRequest, cap: usize) -> Result<SearchResponse, ApiError> {
    let base = SimulateRequest { schedule: PolicySchedule::default(), preset: None, ..req.base.clone() }.scenario()?;
    let cap = req.cap.map_or(cap, |c| c.min(cap));
    let mut ranked = search_policies(&req.space, &base, SearchOptions { cap, parallel: true })?;
    let evaluated = ranked.len();
    ranked.truncate(req.top_k.unwrap_or(DEFAULT_TOP_K));
    Ok(SearchResponse { evaluated, ranked })
}

/// Case file inside the service data directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSource {
    /// Bare file name; paths are rejected.
    pub file: String,
    pub country: String,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

/// Change-point fit input: inline cumulative counts or a [`SeriesSource`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChangepointRequest {
    pub country: Option<String>,
    pub dates: Vec<NaiveDate>,
    /// Cumulative confirmed counts, one per date.
    pub values: Vec<f64>,
    pub source: Option<SeriesSource>,
    pub policy_start: Option<NaiveDate>,
    pub seed: Option<u64>,
    pub num_warmup: Option<usize>,
    pub num_samples: Option<usize>,
    pub num_chains: Option<usize>,
}

impl ChangepointRequest {
    pub fn mcmc(&self, default_seed: u64) -> McmcConfig {
        let d = McmcConfig::default();
        McmcConfig {
            seed: self.seed.unwrap_or(default_seed),
            num_warmup: self.num_warmup.unwrap_or(d.num_warmup),
            num_samples: self.num_samples.unwrap_or(d.num_samples),
            num_chains: self.num_chains.unwrap_or(d.num_chains),
            ..d
        }
    }

    /// The inline series, or the source file read from `data_dir`.
    pub fn series(&self, data_dir: Option<&Path>) -> Result<TimeSeries, ApiError> {
        match &self.source {
            Some(_) if !self.dates.is_empty() || !self.values.is_empty() => {
                Err(ApiError::invalid("give either dates/values or source, not both"))
            }
            Some(src) => {
                let dir = data_dir.ok_or_else(|| ApiError::invalid("no data directory is configured"))?;
                if src.file.is_empty() || src.file.contains(['/', '\\']) || src.file.starts_with('.') {
                    return Err(ApiError::invalid("source.file must be a bare file name"));
                }
                let table = load_table(&dir.join(&src.file))?;
                select(&table, &src.country, src.from, src.to, Field::Confirmed)
            }
            None => inline_series(self.country.as_deref().unwrap_or("series"), &self.dates, &self.values),
        }
    }
}

fn inline_series(country: &str, dates: &[NaiveDate], values: &[f64]) -> Result<TimeSeries, ApiError> {
    if dates.len() != values.len() {
        return Err(ApiError::invalid(format!("{} dates but {} values", dates.len(), values.len())));
    }
    if dates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ApiError::invalid("dates must be strictly increasing"));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(ApiError::invalid("values must be finite and >= 0"));
    }
    Ok(TimeSeries { country: country.into(), field: Field::Confirmed, dates: dates.to_vec(), values: values.to_vec() })
}

pub fn load_table(path: &Path) -> Result<CaseTable, ApiError> {
    let file = File::open(path).map_err(|e| ApiError::invalid(format!("{}: {e}", path.display())))?;
    parse_case_csv(file).map_err(|e| ApiError::invalid(format!("{}: {e}", path.display())))
}

/// Country window; open ends default to the table's first or last day.
pub fn select(
    table: &CaseTable,
    country: &str,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    field: Field,
) -> Result<TimeSeries, ApiError> {
    let range = (from.unwrap_or(NaiveDate::MIN), to.unwrap_or(NaiveDate::MAX));
    select_series(table, country, range, field).map_err(|e| ApiError::invalid(e.to_string()))
}

/// A converged fit with what it was computed from.
pub struct ChangepointFit {
    pub report: FitReport,
    pub posterior: ChangePointPosterior,
    pub regression: RegressionSeries,
}

pub fn fit_series(
    series: &TimeSeries,
    policy_start: Option<NaiveDate>,
    cfg: &McmcConfig,
) -> Result<ChangepointFit, ApiError> {
    let regression = to_log_cumulative(series).map_err(|e| ApiError::invalid(e.to_string()))?;
    match fit_changepoint(&regression, cfg) {
        Ok(posterior) => {
            Ok(ChangepointFit { report: posterior.report(&series.country, policy_start), posterior, regression })
        }
        Err(FitError::NotConverged { max_rhat, posterior }) => {
            let report = serde_json::to_value(posterior.report(&series.country, policy_start))
                .map_err(|e| ApiError::Internal(e.to_string()))?;
            Err(ApiError::NotConverged { max_rhat, report: Box::new(report) })
        }
        Err(FitError::Mcmc(e)) => Err(ApiError::invalid(e.to_string())),
        Err(e) => Err(ApiError::invalid(e.to_string())),
    }
}

pub fn changepoint(
    req: &ChangepointRequest,
    data_dir: Option<&Path>,
    default_seed: u64,
) -> Result<FitReport, ApiError> {
    let series = req.series(data_dir)?;
    Ok(fit_series(&series, req.policy_start, &req.mcmc(default_seed))?.report)
}

pub fn policies() -> Vec<PolicyDef<f64>> {
    pandemic::Catalog::default().policies
}

/// Resolves `name` against `dir` when it is relative and a directory is set.
pub fn resolve(dir: Option<&Path>, name: &Path) -> PathBuf {
    match dir {
        Some(d) if name.is_relative() && !name.exists() => d.join(name),
        _ => name.to_path_buf(),
    }
}
