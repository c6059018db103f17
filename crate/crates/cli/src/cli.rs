//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on bad input or I/O failure, 2 when a fit
//! ran but its chains did not converge (the report is still written).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use mcmc::McmcConfig;
use pandemic::data::Field;
use pandemic::inference::{fit_seird_runs, InferenceError};
use pandemic::policy::PolicyId;
use pandemic::scenario::{write_ranked_csv, SearchSpace};
use serde::Serialize;
use serde_json::json;

use crate::api::{self, ApiError, SearchRequest, SimulateRequest};
use crate::config::{parse_port, AppConfig};

#[derive(Debug, Parser)]
#[command(name = "pandemic", version, about = "Epidemic policy inference and cost simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the change-point model to one country's confirmed cases.
    FitChangepoint(FitChangepointArgs),
    /// Infer SEIRD virus parameters from confirmed cases and deaths.
    FitSeird(FitSeirdArgs),
    /// Run one scenario and write trajectory, loss and summary files.
    Simulate(SimulateArgs),
    /// Rank every feasible block schedule by total loss.
    Search(SearchArgs),
    /// Start the HTTP/JSON service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
}

impl SamplerArgs {
    fn config(&self, base: McmcConfig) -> McmcConfig {
        McmcConfig {
            seed: self.seed.unwrap_or(base.seed),
            num_warmup: self.warmup.unwrap_or(base.num_warmup),
            num_samples: self.samples.unwrap_or(base.num_samples),
            num_chains: self.chains.unwrap_or(base.num_chains),
            ..base
        }
    }
}

#[derive(Debug, Args)]
pub struct FitChangepointArgs {
    /// Case-count CSV (Date, Country/Region, Confirmed, Deaths, Recovered).
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub country: String,
    #[arg(long)]
    pub from: Option<NaiveDate>,
    #[arg(long)]
    pub to: Option<NaiveDate>,
    /// Day the policy was introduced; adds take_effect_days to the report.
    #[arg(long)]
    pub policy_start: Option<NaiveDate>,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV of every posterior draw.
    #[arg(long)]
    pub draws: Option<PathBuf>,
    /// Optional CSV of observed and fitted log counts.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct FitSeirdArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub country: String,
    /// Country population.
    #[arg(long)]
    pub population: f64,
    #[arg(long)]
    pub from: Option<NaiveDate>,
    #[arg(long)]
    pub to: Option<NaiveDate>,
    /// Independent fits averaged into the report, seeds seed..seed+runs.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long, default_value_t = 16)]
    pub leapfrog_steps: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON in the /api/simulate request format; flags override it.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub population: Option<f64>,
    #[arg(long)]
    pub gdp_per_capita: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed_infected: Option<f64>,
    /// Days between a policy starting and its effect.
    #[arg(long)]
    pub lag: Option<usize>,
}

impl ScenarioArgs {
    fn request(&self) -> Result<SimulateRequest, ApiError> {
        let mut req: SimulateRequest = match &self.scenario {
            Some(path) => read_json(path)?,
            None => SimulateRequest::default(),
        };
        req.population = self.population.or(req.population);
        req.gdp_per_capita = self.gdp_per_capita.or(req.gdp_per_capita);
        req.horizon = self.horizon.or(req.horizon);
        req.seed_infected = self.seed_infected.or(req.seed_infected);
        req.lag_days = self.lag.or(req.lag_days);
        Ok(req)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Reference schedule: optimal, tracing_distancing, lockdown,
    /// distancing, masks_hygiene or none.
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory for trajectory.csv, loss.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub block_length: Option<usize>,
    /// Comma-separated policy ids.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<PolicyId>>,
    /// Comma-separated intensity levels from {0, 0.5, 1}.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    #[arg(long, default_value_t = api::DEFAULT_TOP_K)]
    pub top_k: usize,
    #[arg(long)]
    pub cap: Option<usize>,
    /// Ranked CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON response path; printed to stdout when omitted.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Defaults to PPL_PORT, then 8080.
    #[arg(long, value_parser = parse_port)]
    pub port: Option<u16>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ApiError> {
    let text = fs::read_to_string(path).map_err(|e| ApiError::invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ApiError::invalid(format!("{}: {e}", path.display())))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ApiError {
    ApiError::Internal(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ApiError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, ApiError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::FitChangepoint(a) => fit_changepoint(&a),
        Command::FitSeird(a) => fit_seird(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Search(a) => search(&a),
        Command::Serve(a) => serve(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let ApiError::Invalid { violations, .. } = &e {
                for v in violations {
                    eprintln!("  block {}: {}", v.block, v.message);
                }
            }
            e.exit_code()
        }
    }
}

fn fit_changepoint(a: &FitChangepointArgs) -> Result<(), ApiError> {
    let table = api::load_table(&a.csv)?;
    let series = api::select(&table, &a.country, a.from, a.to, Field::Confirmed)?;
    let cfg = a.sampler.config(McmcConfig::default());
    match api::fit_series(&series, a.policy_start, &cfg) {
        Ok(fit) => {
            write_json(&a.out, &fit.report)?;
            if let Some(p) = &a.draws {
                fit.posterior.write_draws_csv(create(p)?).map_err(|e| io_err(p, e))?;
            }
            if let Some(p) = &a.plot {
                fit.posterior.write_plot_csv(&fit.regression, create(p)?).map_err(|e| io_err(p, e))?;
            }
            let r = &fit.report;
            println!(
                "{}: change {} efficiency {:.4} max R-hat {:.4}",
                r.country,
                r.change_date,
                r.efficiency.mean,
                fit.posterior.max_rhat()
            );
            Ok(())
        }
        Err(ApiError::NotConverged { max_rhat, report }) => {
            write_json(&a.out, &report)?;
            Err(ApiError::NotConverged { max_rhat, report })
        }
        Err(e) => Err(e),
    }
}

fn fit_seird(a: &FitSeirdArgs) -> Result<(), ApiError> {
    let table = api::load_table(&a.csv)?;
    let confirmed = api::select(&table, &a.country, a.from, a.to, Field::Confirmed)?;
    let deaths = api::select(&table, &a.country, a.from, a.to, Field::Deaths)?;
    let cfg = a.sampler.config(McmcConfig { leapfrog_steps: a.leapfrog_steps, ..Default::default() });
    match fit_seird_runs(&confirmed, &deaths, a.population, &cfg, a.runs) {
        Ok(report) => {
            write_json(&a.out, &json!({ "country": a.country, "report": report }))?;
            println!(
                "{}: recovery {:.2} d, incubation {:.2} d, R0 {:.3}, case fatality {:.4}",
                a.country,
                report.recovery_time_days.mean,
                report.incubation_time_days.mean,
                report.r0.mean,
                report.case_fatality.mean
            );
            Ok(())
        }
        Err(InferenceError::NotConverged { max_rhat, posterior }) => {
            let report = json!({ "country": a.country, "report": posterior.report() });
            write_json(&a.out, &report)?;
            Err(ApiError::NotConverged { max_rhat, report: Box::new(report) })
        }
        Err(InferenceError::Mcmc(e)) => Err(ApiError::Internal(e.to_string())),
        Err(e) => Err(ApiError::invalid(e.to_string())),
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub label: &'a str,
    pub totals: &'a api::Totals,
}

fn simulate(a: &SimulateArgs) -> Result<(), ApiError> {
    let mut req = a.scenario.request()?;
    if a.preset.is_some() {
        req.preset = a.preset.clone();
    }
    let resp = api::simulate(&req)?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    let path = a.out.join("trajectory.csv");
    resp.trajectory.write_csv(create(&path)?).map_err(|e| io_err(&path, e))?;
    let path = a.out.join("loss.csv");
    resp.loss.write_csv(create(&path)?).map_err(|e| io_err(&path, e))?;
    write_json(&a.out.join("summary.json"), &Summary { label: &resp.label, totals: &resp.totals })?;
    let t = &resp.totals;
    println!("{}: cases {:.2}, deaths {:.2}, loss ${:.2}", resp.label, t.cases, t.deaths, t.loss);
    Ok(())
}

fn search(a: &SearchArgs) -> Result<(), ApiError> {
    let defaults = SearchSpace::default();
    let space = SearchSpace {
        block_length: a.block_length.unwrap_or(defaults.block_length),
        policies: a.policies.clone().unwrap_or(defaults.policies),
        levels: a.levels.clone().unwrap_or(defaults.levels),
    };
    let req = SearchRequest { base: a.scenario.request()?, space, top_k: Some(a.top_k), cap: None };
    let cap = a.cap.unwrap_or(AppConfig::default().search_cap);
    let resp = api::search(&req, cap)?;
    if let Some(p) = &a.out {
        write_ranked_csv(&resp.ranked, create(p)?).map_err(|e| io_err(p, e))?;
    }
    match &a.json {
        Some(p) => write_json(p, &resp)?,
        None => {
            let text = serde_json::to_string_pretty(&resp).map_err(|e| ApiError::Internal(e.to_string()))?;
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| ApiError::Internal(e.to_string()))?;
        }
    }
    eprintln!("evaluated {} schedules", resp.evaluated);
    Ok(())
}

fn serve(a: &ServeArgs) -> Result<(), ApiError> {
    let mut cfg = AppConfig::from_env().map_err(|e| ApiError::invalid(e.to_string()))?;
    if let Some(p) = a.port {
        cfg.port = p;
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| ApiError::Internal(e.to_string()))?;
    rt.block_on(crate::server::serve(cfg)).map_err(|e| ApiError::Internal(format!("server: {e}")))
}
