//! Piecewise-linear change-point model for log cumulative case counts.
//!
//! ```text
//! y = w t + b + eps,   eps ~ StudentT(2, 0, noise_scale)
//! (w, b) = (w1, b1) if t < tau else (w2, b2)
//! ```
//!
//! Time is normalized to `[0, 1]` over the series. The drop from `w1` to `w2`
//! measures how strongly an intervention slowed transmission; its relative
//! size `1 - w2 / w1` is the policy efficiency.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use mcmc::{
    diagnostics, sample_gibbs_hybrid, Block, Chain, McmcConfig, McmcError, ParamSummary,
    ProbModel, Transform,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::RegressionSeries;
use crate::stats::{beta_ln_pdf, half_normal_ln_pdf, student_t_ln_pdf, NormalPrior};

pub const MIN_FIT_POINTS: usize = 20;
pub const RHAT_THRESHOLD: f64 = 1.05;
pub const STUDENT_DF: f64 = 2.0;
pub const PARAM_NAMES: [&str; 6] = ["w1", "w2", "b1", "b2", "tau", "noise_scale"];
const TAU_PRIOR: (f64, f64) = (4.0, 3.0);
const NOISE_PRIOR_SD: f64 = 0.1;
const B2_SD_FLOOR: f64 = 0.1;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("series is degenerate: {0}")]
    DegenerateSeries(String),
    #[error("need at least {need} points, have {have}")]
    TooFewPoints { have: usize, need: usize },
    #[error("chains did not converge: max R-hat {max_rhat:.4} >= {RHAT_THRESHOLD}")]
    NotConverged { max_rhat: f64, posterior: Box<ChangePointPosterior> },
    #[error("slope before the change-point is zero")]
    ZeroSlope,
    #[error("baseline reproduction number must be > 0")]
    ZeroBaseline,
    #[error(transparent)]
    Mcmc(#[from] McmcError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePointParams {
    pub w1: f64,
    pub w2: f64,
    pub b1: f64,
    pub b2: f64,
    pub tau: f64,
    pub noise_scale: f64,
}

impl ChangePointParams {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.w1, self.w2, self.b1, self.b2, self.tau, self.noise_scale]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { w1: v[0], w2: v[1], b1: v[2], b2: v[3], tau: v[4], noise_scale: v[5] }
    }

    /// Noise-free prediction at normalized time `t`.
    pub fn predict(&self, t: f64) -> f64 {
        if t < self.tau {
            self.w1 * t + self.b1
        } else {
            self.w2 * t + self.b2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePointPriors {
    pub w1: NormalPrior,
    pub w2: NormalPrior,
    pub b1: NormalPrior,
    pub b2: NormalPrior,
    pub tau_alpha: f64,
    pub tau_beta: f64,
    pub noise_sd: f64,
    /// Set when `0.25 * |m2|` fell below the floor and the floor was used.
    pub b2_sd_floored: bool,
}

impl ChangePointPriors {
    pub fn ln_density(&self, p: &ChangePointParams) -> f64 {
        self.w1.ln_pdf(p.w1)
            + self.w2.ln_pdf(p.w2)
            + self.b1.ln_pdf(p.b1)
            + self.b2.ln_pdf(p.b2)
            + beta_ln_pdf(p.tau, self.tau_alpha, self.tau_beta)
            + half_normal_ln_pdf(p.noise_scale, self.noise_sd)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Slope priors N(0.5, 0.25) and N(0, 0.25) apply to per-day slopes, so on
/// normalized time they are scaled by the span in days. Intercept priors are
/// centred on the mean of `y` over the first quartile (`t <= 0.25`) and
/// fourth quartile (`t >= 0.75`) of time.
pub fn build_priors(series: &RegressionSeries) -> Result<ChangePointPriors, FitError> {
    let q1: Vec<f64> = series.t.iter().zip(&series.y).filter(|(t, _)| **t <= 0.25).map(|(_, y)| *y).collect();
    let q4: Vec<f64> = series.t.iter().zip(&series.y).filter(|(t, _)| **t >= 0.75).map(|(_, y)| *y).collect();
    if q1.is_empty() || q4.is_empty() {
        return Err(FitError::DegenerateSeries("a time quartile has no points".into()));
    }
    if series.y.iter().chain(&series.t).any(|v| !v.is_finite()) {
        return Err(FitError::DegenerateSeries("non-finite values".into()));
    }
    let (m1, m2) = (mean(&q1), mean(&q4));
    let raw = (0.25 * m2).abs();
    let span = series.span_days().max(1) as f64;
    Ok(ChangePointPriors {
        w1: NormalPrior::new(0.5 * span, 0.25 * span),
        w2: NormalPrior::new(0.0, 0.25 * span),
        b1: NormalPrior::new(m1, 1.0),
        b2: NormalPrior::new(m2, raw.max(B2_SD_FLOOR)),
        tau_alpha: TAU_PRIOR.0,
        tau_beta: TAU_PRIOR.1,
        noise_sd: NOISE_PRIOR_SD,
        b2_sd_floored: raw < B2_SD_FLOOR,
    })
}

/// Log posterior density (unnormalized only through the evidence);
/// `-inf` off the support.
pub fn log_posterior(params: &ChangePointParams, series: &RegressionSeries, priors: &ChangePointPriors) -> f64 {
    if !(params.tau > 0.0 && params.tau < 1.0 && params.noise_scale > 0.0) {
        return f64::NEG_INFINITY;
    }
    let prior = priors.ln_density(params);
    let lik: f64 = series
        .t
        .iter()
        .zip(&series.y)
        .map(|(&t, &y)| student_t_ln_pdf(y, STUDENT_DF, params.predict(t), params.noise_scale))
        .sum();
    prior + lik
}

/// Writes the gradient of [`log_posterior`] into `grad` (parameter order of
/// [`PARAM_NAMES`]). `tau` only receives its prior term: the likelihood is
/// flat in `tau` between data points.
pub fn grad_log_posterior(
    params: &ChangePointParams,
    series: &RegressionSeries,
    priors: &ChangePointPriors,
    grad: &mut [f64],
) {
    let s = params.noise_scale;
    let df = STUDENT_DF;
    let mut g = [0.0; 6];
    for (&t, &y) in series.t.iter().zip(&series.y) {
        let z = (y - params.predict(t)) / s;
        // d/d loc of ln StudentT = (df + 1) z / (s (df + z^2))
        let dloc = (df + 1.0) * z / (s * (df + z * z));
        if t < params.tau {
            g[0] += dloc * t;
            g[2] += dloc;
        } else {
            g[1] += dloc * t;
            g[3] += dloc;
        }
        g[5] += -1.0 / s + (df + 1.0) * z * z / (s * (df + z * z));
    }
    g[0] += priors.w1.d_ln_pdf(params.w1);
    g[1] += priors.w2.d_ln_pdf(params.w2);
    g[2] += priors.b1.d_ln_pdf(params.b1);
    g[3] += priors.b2.d_ln_pdf(params.b2);
    g[4] += (priors.tau_alpha - 1.0) / params.tau - (priors.tau_beta - 1.0) / (1.0 - params.tau);
    g[5] += -s / (priors.noise_sd * priors.noise_sd);
    grad.copy_from_slice(&g);
}

/// Target density for the samplers.
pub struct ChangePointModel<'a> {
    pub series: &'a RegressionSeries,
    pub priors: ChangePointPriors,
}

impl ProbModel for ChangePointModel<'_> {
    fn dim(&self) -> usize {
        6
    }

    fn transform(&self, index: usize) -> Transform {
        match index {
            4 => Transform::UNIT,
            5 => Transform::POSITIVE,
            _ => Transform::Identity,
        }
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        log_posterior(&ChangePointParams::from_slice(theta), self.series, &self.priors)
    }

    fn grad_log_density(&self, theta: &[f64], grad: &mut [f64]) -> bool {
        grad_log_posterior(&ChangePointParams::from_slice(theta), self.series, &self.priors, grad);
        true
    }

    fn param_names(&self) -> Vec<String> {
        PARAM_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn initial_point(&self) -> Option<Vec<f64>> {
        Some(initial_estimate(self.series, &self.priors).to_vec())
    }
}

/// Least-squares line through `(t, y)`; `None` with fewer than two distinct `t`.
fn ols(t: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    if t.len() < 2 {
        return None;
    }
    let (mt, my) = (mean(t), mean(y));
    let sxx: f64 = t.iter().map(|v| (v - mt).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let w = sxy / sxx;
    let b = my - w * mt;
    let sse = t.iter().zip(y).map(|(a, c)| (c - w * a - b).powi(2)).sum();
    Some((w, b, sse))
}

/// Starting point from a grid search over change-points with a separate
/// least-squares line on each side. Falls back to the prior means.
pub fn initial_estimate(series: &RegressionSeries, priors: &ChangePointPriors) -> ChangePointParams {
    let fallback = ChangePointParams {
        w1: priors.w1.mean,
        w2: priors.w2.mean,
        b1: priors.b1.mean,
        b2: priors.b2.mean,
        tau: priors.tau_alpha / (priors.tau_alpha + priors.tau_beta),
        noise_scale: priors.noise_sd,
    };
    let n = series.len();
    let mut best: Option<(f64, ChangePointParams)> = None;
    for k in 2..n.saturating_sub(1) {
        let tau = 0.5 * (series.t[k - 1] + series.t[k]);
        if !(0.02..=0.98).contains(&tau) {
            continue;
        }
        let (Some((w1, b1, e1)), Some((w2, b2, e2))) =
            (ols(&series.t[..k], &series.y[..k]), ols(&series.t[k..], &series.y[k..]))
        else {
            continue;
        };
        let sse = e1 + e2;
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            let noise = (sse / n as f64).sqrt().clamp(1e-4, 1.0);
            best = Some((sse, ChangePointParams { w1, w2, b1, b2, tau, noise_scale: noise }));
        }
    }
    best.map(|(_, p)| p).unwrap_or(fallback)
}

/// Serializable posterior summary of one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub sd: f64,
    /// 3% quantile.
    pub lower: f64,
    /// 97% quantile.
    pub upper: f64,
}

impl From<ParamSummary> for Estimate {
    fn from(s: ParamSummary) -> Self {
        Self { mean: s.mean, sd: s.sd, lower: s.lower, upper: s.upper }
    }
}

#[derive(Debug, Clone)]
pub struct ChangePointPosterior {
    pub chains: Vec<Chain>,
    pub priors: ChangePointPriors,
    /// Keyed by [`PARAM_NAMES`].
    pub summaries: BTreeMap<String, Estimate>,
    pub efficiency: Estimate,
    /// Day nearest to the posterior mean of `tau`.
    pub change_date: NaiveDate,
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl ChangePointPosterior {
    pub fn summary(&self, name: &str) -> Estimate {
        self.summaries[name]
    }

    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn converged(&self) -> bool {
        self.max_rhat() < RHAT_THRESHOLD
    }

    pub fn span_days(&self) -> i64 {
        (self.end - self.start).num_days()
    }

    /// Slope in log cases per day: normalized slope divided by the span.
    pub fn per_day(&self, w: f64) -> f64 {
        w / self.span_days().max(1) as f64
    }

    fn draws(&self) -> impl Iterator<Item = ChangePointParams> + '_ {
        self.chains.iter().flat_map(|c| c.draws.iter().map(|d| ChangePointParams::from_slice(d)))
    }

    /// Posterior mean of the fitted curve at each `t`.
    pub fn mean_fit(&self, t: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; t.len()];
        let mut count = 0usize;
        for p in self.draws() {
            for (a, &x) in acc.iter_mut().zip(t) {
                *a += p.predict(x);
            }
            count += 1;
        }
        acc.iter().map(|a| a / count.max(1) as f64).collect()
    }

    /// Columns: chain, draw, then one per parameter, then efficiency.
    pub fn write_draws_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["chain".to_string(), "draw".to_string()];
        header.extend(PARAM_NAMES.iter().map(|s| s.to_string()));
        header.push("efficiency".into());
        w.write_record(&header)?;
        for (c, chain) in self.chains.iter().enumerate() {
            for (k, d) in chain.draws.iter().enumerate() {
                let mut rec = vec![c.to_string(), k.to_string()];
                rec.extend(d.iter().map(|v| v.to_string()));
                rec.push(efficiency(d[0], d[1]).map(|e| e.to_string()).unwrap_or_default());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Columns: t, date, y, fit.
    pub fn write_plot_csv<W: Write>(&self, series: &RegressionSeries, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "date", "y", "fit"])?;
        let fit = self.mean_fit(&series.t);
        for ((t, y), f) in series.t.iter().zip(&series.y).zip(fit) {
            w.write_record([t.to_string(), series.date_at(*t).to_string(), y.to_string(), f.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn report(&self, country: &str, policy_start: Option<NaiveDate>) -> FitReport {
        let lag = policy_start.map(|d| take_effect_days(self, d));
        let named = |v: &[f64]| -> BTreeMap<String, f64> {
            PARAM_NAMES.iter().zip(v).map(|(n, x)| (n.to_string(), *x)).collect()
        };
        let w1 = self.summary("w1");
        let w2 = self.summary("w2");
        FitReport {
            country: country.to_string(),
            date_range: (self.start, self.end),
            policy_start,
            w1,
            w2,
            w1_per_day: self.per_day(w1.mean),
            w2_per_day: self.per_day(w2.mean),
            tau: self.summary("tau"),
            change_date: self.change_date,
            efficiency: self.efficiency,
            take_effect_days: lag.map(|l| l.days),
            negative_lag: lag.is_some_and(|l| l.negative_lag),
            rhat: named(&self.rhat),
            ess: named(&self.ess),
            converged: self.converged(),
        }
    }
}

/// JSON fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub country: String,
    pub date_range: (NaiveDate, NaiveDate),
    pub policy_start: Option<NaiveDate>,
    /// Slopes per unit normalized time.
    pub w1: Estimate,
    pub w2: Estimate,
    /// Posterior-mean slopes per day.
    pub w1_per_day: f64,
    pub w2_per_day: f64,
    pub tau: Estimate,
    pub change_date: NaiveDate,
    pub efficiency: Estimate,
    pub take_effect_days: Option<i64>,
    pub negative_lag: bool,
    pub rhat: BTreeMap<String, f64>,
    pub ess: BTreeMap<String, f64>,
    pub converged: bool,
}

/// Samples the posterior: HMC on `(w1, w2, b1, b2, noise_scale)` and an
/// adaptive random walk on logit `tau`, alternating within each iteration.
pub fn fit_changepoint(series: &RegressionSeries, cfg: &McmcConfig) -> Result<ChangePointPosterior, FitError> {
    if series.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints { have: series.len(), need: MIN_FIT_POINTS });
    }
    let priors = build_priors(series)?;
    let posterior = sample_posterior(series, priors, cfg)?;
    if !posterior.converged() {
        return Err(FitError::NotConverged { max_rhat: posterior.max_rhat(), posterior: Box::new(posterior) });
    }
    Ok(posterior)
}

/// Samples without the size and convergence checks of [`fit_changepoint`].
pub fn sample_posterior(
    series: &RegressionSeries,
    priors: ChangePointPriors,
    cfg: &McmcConfig,
) -> Result<ChangePointPosterior, FitError> {
    let model = ChangePointModel { series, priors };
    let blocks = [Block::hmc(vec![0, 1, 2, 3, 5]), Block::rwmh(vec![4], vec![0.5], true)];
    let chains = sample_gibbs_hybrid(&model, cfg, &blocks)?;
    let diag = diagnostics(&chains)?;
    let summaries = PARAM_NAMES
        .iter()
        .enumerate()
        .map(|(i, n)| (n.to_string(), Estimate::from(ParamSummary::from_chains(&chains, i))))
        .collect::<BTreeMap<_, _>>();
    let eff: Vec<f64> = chains
        .iter()
        .flat_map(|c| c.draws.iter().filter_map(|d| efficiency(d[0], d[1]).ok()))
        .collect();
    if eff.is_empty() {
        return Err(FitError::ZeroSlope);
    }
    let change_date = series.date_at(summaries["tau"].mean);
    Ok(ChangePointPosterior {
        chains,
        priors,
        summaries,
        efficiency: ParamSummary::from_values(&eff).into(),
        change_date,
        rhat: diag.rhat,
        ess: diag.ess,
        start: series.start,
        end: series.end,
    })
}

/// `1 - w2 / w1`.
pub fn efficiency(w1: f64, w2: f64) -> Result<f64, FitError> {
    if w1 == 0.0 {
        return Err(FitError::ZeroSlope);
    }
    Ok(1.0 - w2 / w1)
}

/// `1 - re_after / r0_baseline`.
pub fn efficiency_from_re(re_after: f64, r0_baseline: f64) -> Result<f64, FitError> {
    if !(r0_baseline > 0.0) {
        return Err(FitError::ZeroBaseline);
    }
    Ok(1.0 - re_after / r0_baseline)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TakeEffect {
    pub days: i64,
    /// The change-point precedes the policy start.
    pub negative_lag: bool,
}

/// Whole days from the policy start to the estimated change date.
pub fn take_effect_days(posterior: &ChangePointPosterior, policy_start: NaiveDate) -> TakeEffect {
    let days = (posterior.change_date - policy_start).num_days();
    if days < 0 {
        log::warn!("change-point {} precedes policy start {policy_start}", posterior.change_date);
    }
    TakeEffect { days, negative_lag: days < 0 }
}
