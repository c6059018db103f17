//! Virus parameters from daily confirmed cases and deaths.
//!
//! The SEIRD trajectory is deterministic given
//! `(r0, recovery_time, incubation_time, mu, e0, i0)`; observed daily counts
//! are negative binomial around its flows. New confirmed cases are matched to
//! the E -> I flow and new deaths to the I -> D flow.

use std::collections::BTreeMap;

use mcmc::{diagnostics, sample_hmc, Chain, McmcConfig, McmcError, ParamSummary, ProbModel, Transform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::changepoint::{Estimate, RHAT_THRESHOLD};
use crate::data::TimeSeries;
use crate::seird::{simulate, SeirdParams, SeirdState};
use crate::stats::{beta_ln_pdf, lognormal_ln_pdf, neg_binomial_ln_pmf, truncated_normal_ln_pdf};

pub const MIN_DAYS: usize = 21;
/// Negative-binomial dispersion: variance = mean + mean^2 / DISPERSION.
pub const DISPERSION: f64 = 10.0;
/// Smallest mean passed to the count likelihood.
pub const MEAN_FLOOR: f64 = 1e-12;
pub const PARAM_NAMES: [&str; 6] = ["r0", "recovery_time", "incubation_time", "mu", "e0", "i0"];

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("need at least {need} days, have {have}")]
    TooFewPoints { have: usize, need: usize },
    #[error("series are not aligned: {0}")]
    Misaligned(String),
    #[error("population must be > 0")]
    BadPopulation,
    #[error("chains did not converge: max R-hat {max_rhat:.4} >= {RHAT_THRESHOLD}")]
    NotConverged { max_rhat: f64, posterior: Box<SeirdPosterior> },
    #[error(transparent)]
    Mcmc(#[from] McmcError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeirdTheta {
    pub r0: f64,
    pub recovery_time: f64,
    pub incubation_time: f64,
    pub mu: f64,
    pub e0: f64,
    pub i0: f64,
}

impl SeirdTheta {
    pub fn from_slice(v: &[f64]) -> Self {
        Self { r0: v[0], recovery_time: v[1], incubation_time: v[2], mu: v[3], e0: v[4], i0: v[5] }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.r0, self.recovery_time, self.incubation_time, self.mu, self.e0, self.i0]
    }

    pub fn params(&self, n: f64) -> SeirdParams<f64> {
        SeirdParams {
            r0: self.r0,
            gamma: 1.0 / self.recovery_time,
            sigma: 1.0 / self.incubation_time,
            mu: self.mu,
            alpha: 0.0,
            n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeirdPriors {
    /// Log-normal `(mu, sigma)` of the log.
    pub r0: (f64, f64),
    /// Normal `(mean, sd, lower bound)`, truncated below.
    pub recovery_time: (f64, f64, f64),
    pub incubation_time: (f64, f64, f64),
    /// Beta `(alpha, beta)`.
    pub mu: (f64, f64),
    pub e0: (f64, f64),
    pub i0: (f64, f64),
}

impl Default for SeirdPriors {
    fn default() -> Self {
        Self {
            r0: (2f64.ln(), 0.5),
            recovery_time: (14.0, 3.0, 2.0),
            incubation_time: (5.5, 1.5, 1.0),
            mu: beta_from_moments(0.025, 0.01),
            e0: (10f64.ln(), 1.0),
            i0: (10f64.ln(), 1.0),
        }
    }
}

impl SeirdPriors {
    pub fn ln_density(&self, th: &SeirdTheta) -> f64 {
        lognormal_ln_pdf(th.r0, self.r0.0, self.r0.1)
            + truncated_normal_ln_pdf(th.recovery_time, self.recovery_time.0, self.recovery_time.1, self.recovery_time.2)
            + truncated_normal_ln_pdf(
                th.incubation_time,
                self.incubation_time.0,
                self.incubation_time.1,
                self.incubation_time.2,
            )
            + beta_ln_pdf(th.mu, self.mu.0, self.mu.1)
            + lognormal_ln_pdf(th.e0, self.e0.0, self.e0.1)
            + lognormal_ln_pdf(th.i0, self.i0.0, self.i0.1)
    }

    pub fn means(&self) -> SeirdTheta {
        SeirdTheta {
            r0: (self.r0.0 + 0.5 * self.r0.1 * self.r0.1).exp(),
            recovery_time: self.recovery_time.0,
            incubation_time: self.incubation_time.0,
            mu: self.mu.0 / (self.mu.0 + self.mu.1),
            e0: (self.e0.0 + 0.5 * self.e0.1 * self.e0.1).exp(),
            i0: (self.i0.0 + 0.5 * self.i0.1 * self.i0.1).exp(),
        }
    }
}

/// Beta shape parameters with the given mean and standard deviation.
pub fn beta_from_moments(mean: f64, sd: f64) -> (f64, f64) {
    let k = mean * (1.0 - mean) / (sd * sd) - 1.0;
    (mean * k, (1.0 - mean) * k)
}

/// Daily counts aligned on the same days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeirdData {
    pub confirmed: Vec<f64>,
    /// `None` drops the death term from the likelihood.
    pub deaths: Option<Vec<f64>>,
    pub n: f64,
}

impl SeirdData {
    pub fn days(&self) -> usize {
        self.confirmed.len()
    }
}

/// Model-mean daily flows `(new confirmed, new deaths)` for `theta`.
pub fn mean_flows(theta: &SeirdTheta, n: f64, days: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    if days == 0 {
        return Some((Vec::new(), Vec::new()));
    }
    let init = SeirdState::seeded(n, theta.e0, theta.i0);
    let traj = simulate(&init, &theta.params(n), |_| theta.r0, None, days).ok()?;
    Some(traj.flows.iter().map(|f| (f.new_infectious, f.new_deaths)).unzip())
}

pub fn seird_log_likelihood(theta: &SeirdTheta, data: &SeirdData) -> f64 {
    let days = data.days();
    if theta.e0 + theta.i0 >= data.n {
        return f64::NEG_INFINITY;
    }
    let Some((cases, deaths)) = mean_flows(theta, data.n, days) else {
        return f64::NEG_INFINITY;
    };
    let mut ll: f64 = data
        .confirmed
        .iter()
        .zip(&cases)
        .map(|(y, m)| neg_binomial_ln_pmf(*y, m.max(MEAN_FLOOR), DISPERSION))
        .sum();
    if let Some(obs) = &data.deaths {
        ll += obs
            .iter()
            .zip(&deaths)
            .map(|(y, m)| neg_binomial_ln_pmf(*y, m.max(MEAN_FLOOR), DISPERSION))
            .sum::<f64>();
    }
    ll
}

pub fn seird_log_posterior(theta: &SeirdTheta, data: &SeirdData, priors: &SeirdPriors) -> f64 {
    let prior = priors.ln_density(theta);
    if !prior.is_finite() {
        return f64::NEG_INFINITY;
    }
    prior + seird_log_likelihood(theta, data)
}

pub struct SeirdModel<'a> {
    pub data: &'a SeirdData,
    pub priors: SeirdPriors,
}

impl ProbModel for SeirdModel<'_> {
    fn dim(&self) -> usize {
        6
    }

    fn transform(&self, index: usize) -> Transform {
        match index {
            1 => Transform::LowerBound(self.priors.recovery_time.2),
            2 => Transform::LowerBound(self.priors.incubation_time.2),
            3 => Transform::UNIT,
            _ => Transform::POSITIVE,
        }
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        seird_log_posterior(&SeirdTheta::from_slice(theta), self.data, &self.priors)
    }

    fn param_names(&self) -> Vec<String> {
        PARAM_NAMES.iter().map(|s| s.to_string()).collect()
    }

    /// Prior centre for the rates; seeds sized from the first reported days.
    fn initial_point(&self) -> Option<Vec<f64>> {
        let mut th = SeirdTheta {
            r0: self.priors.r0.0.exp(),
            recovery_time: self.priors.recovery_time.0,
            incubation_time: self.priors.incubation_time.0,
            mu: self.priors.mu.0 / (self.priors.mu.0 + self.priors.mu.1),
            e0: self.priors.e0.0.exp(),
            i0: self.priors.i0.0.exp(),
        };
        let head: Vec<f64> = self.data.confirmed.iter().take(3).copied().collect();
        if !head.is_empty() {
            let daily = head.iter().sum::<f64>() / head.len() as f64;
            th.e0 = (daily * th.incubation_time).max(1.0);
            th.i0 = (daily * th.recovery_time * 0.5).max(1.0);
        }
        let cap = 0.01 * self.data.n;
        th.e0 = th.e0.min(cap);
        th.i0 = th.i0.min(cap);
        Some(th.to_vec())
    }
}

#[derive(Debug, Clone)]
pub struct SeirdPosterior {
    pub chains: Vec<Chain>,
    pub summaries: BTreeMap<String, Estimate>,
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
}

impl SeirdPosterior {
    pub fn summary(&self, name: &str) -> Estimate {
        self.summaries[name]
    }

    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn report(&self) -> SeirdReport {
        SeirdReport {
            recovery_time_days: self.summary("recovery_time"),
            incubation_time_days: self.summary("incubation_time"),
            r0: self.summary("r0"),
            case_fatality: self.summary("mu"),
            runs: 1,
            max_rhat: self.max_rhat(),
        }
    }
}

/// JSON report of the virus parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeirdReport {
    pub recovery_time_days: Estimate,
    pub incubation_time_days: Estimate,
    pub r0: Estimate,
    pub case_fatality: Estimate,
    /// Number of independent runs averaged into this report.
    pub runs: usize,
    pub max_rhat: f64,
}

impl SeirdReport {
    /// Field-wise average of several runs' summaries.
    pub fn average(reports: &[SeirdReport]) -> Option<SeirdReport> {
        if reports.is_empty() {
            return None;
        }
        let k = reports.len() as f64;
        let avg = |f: fn(&SeirdReport) -> Estimate| {
            let sum = reports.iter().map(f).fold((0.0, 0.0, 0.0, 0.0), |a, e| {
                (a.0 + e.mean, a.1 + e.sd, a.2 + e.lower, a.3 + e.upper)
            });
            Estimate { mean: sum.0 / k, sd: sum.1 / k, lower: sum.2 / k, upper: sum.3 / k }
        };
        Some(SeirdReport {
            recovery_time_days: avg(|r| r.recovery_time_days),
            incubation_time_days: avg(|r| r.incubation_time_days),
            r0: avg(|r| r.r0),
            case_fatality: avg(|r| r.case_fatality),
            runs: reports.iter().map(|r| r.runs).sum(),
            max_rhat: reports.iter().map(|r| r.max_rhat).fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// HMC over all six parameters; no convergence check.
pub fn sample_seird(data: &SeirdData, priors: SeirdPriors, cfg: &McmcConfig) -> Result<SeirdPosterior, InferenceError> {
    if !(data.n > 0.0) {
        return Err(InferenceError::BadPopulation);
    }
    if let Some(d) = &data.deaths {
        if d.len() != data.confirmed.len() {
            return Err(InferenceError::Misaligned(format!(
                "{} confirmed days vs {} death days",
                data.confirmed.len(),
                d.len()
            )));
        }
    }
    let model = SeirdModel { data, priors };
    let chains = sample_hmc(&model, cfg)?;
    let diag = diagnostics(&chains)?;
    let summaries = PARAM_NAMES
        .iter()
        .enumerate()
        .map(|(i, n)| (n.to_string(), Estimate::from(ParamSummary::from_chains(&chains, i))))
        .collect();
    Ok(SeirdPosterior { chains, summaries, rhat: diag.rhat, ess: diag.ess })
}

/// Fits cumulative confirmed and death series for one country. Cumulative
/// counts are differenced into daily counts, clamping negatives to zero.
pub fn fit_seird(
    confirmed: &TimeSeries,
    deaths: &TimeSeries,
    n: f64,
    cfg: &McmcConfig,
) -> Result<SeirdPosterior, InferenceError> {
    if confirmed.dates != deaths.dates {
        return Err(InferenceError::Misaligned("confirmed and death series cover different days".into()));
    }
    if confirmed.len() < MIN_DAYS {
        return Err(InferenceError::TooFewPoints { have: confirmed.len(), need: MIN_DAYS });
    }
    let data = SeirdData { confirmed: confirmed.daily_increments(), deaths: Some(deaths.daily_increments()), n };
    let posterior = sample_seird(&data, SeirdPriors::default(), cfg)?;
    if posterior.max_rhat() >= RHAT_THRESHOLD {
        return Err(InferenceError::NotConverged { max_rhat: posterior.max_rhat(), posterior: Box::new(posterior) });
    }
    Ok(posterior)
}

/// Repeats [`fit_seird`] with seeds `cfg.seed + k` and averages the reports.
pub fn fit_seird_runs(
    confirmed: &TimeSeries,
    deaths: &TimeSeries,
    n: f64,
    cfg: &McmcConfig,
    runs: usize,
) -> Result<SeirdReport, InferenceError> {
    let mut reports = Vec::with_capacity(runs);
    for k in 0..runs.max(1) {
        let c = McmcConfig { seed: cfg.seed.wrapping_add(k as u64), ..cfg.clone() };
        reports.push(fit_seird(confirmed, deaths, n, &c)?.report());
    }
    Ok(SeirdReport::average(&reports).expect("at least one run"))
}
