//! End-to-end scenario runs and exhaustive monthly schedule search.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::econ::{accumulate, EconError, EconParams, LossBreakdown};
use crate::num::Real;
use crate::policy::{
    re_schedule, validate_schedule, Assignment, Catalog, PolicyError, PolicyId, PolicySchedule,
    ScheduleBlock, Violation, INTENSITY_LEVELS,
};
use crate::seird::{simulate_with, IcuModel, SeirdError, SeirdParams, SeirdState, Trajectory, DEFAULT_SUBSTEPS};

/// Initially infectious people in the default scenario. Chosen so that the
/// unmitigated 90-day epidemic in a country of one million reaches roughly
/// 28,000 deaths.
pub const DEFAULT_SEED_INFECTED: f64 = 9_000.0;
pub const DEFAULT_SEARCH_CAP: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid schedule")]
    InvalidSchedule(Vec<Violation>),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Seird(#[from] SeirdError),
    #[error(transparent)]
    Econ(#[from] EconError),
    #[error("search space has {size} schedules, above the cap of {cap}")]
    SpaceTooLarge { size: u128, cap: usize },
    #[error("block length {block_length} does not divide horizon {horizon}")]
    BlockLength { block_length: usize, horizon: usize },
}

impl From<PolicyError> for ScenarioError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::NonPositiveR0 => ScenarioError::InvalidScenario(e.to_string()),
            other => ScenarioError::InvalidSchedule(other.violations()),
        }
    }
}

impl ScenarioError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ScenarioError::InvalidSchedule(v) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Scenario<T> {
    pub label: String,
    pub population: T,
    pub horizon: usize,
    pub seed_infected: T,
    /// `params.n` is ignored; `population` is used instead.
    pub params: SeirdParams<T>,
    pub icu: IcuModel<T>,
    pub econ: EconParams<T>,
    pub catalog: Catalog<T>,
    pub schedule: PolicySchedule,
    pub substeps: usize,
}

impl<T: Real> Default for Scenario<T> {
    /// One million people, $30,000 GDP per capita, 90 days, no policy.
    fn default() -> Self {
        let n = T::lit(1e6);
        Self {
            label: "no policy".into(),
            population: n,
            horizon: 90,
            seed_infected: T::lit(DEFAULT_SEED_INFECTED),
            params: SeirdParams::covid(n),
            icu: IcuModel::default(),
            econ: EconParams::default(),
            catalog: Catalog::default(),
            schedule: PolicySchedule::default(),
            substeps: DEFAULT_SUBSTEPS,
        }
    }
}

impl<T: Real> Scenario<T> {
    pub fn with_schedule(&self, label: impl Into<String>, schedule: PolicySchedule) -> Self {
        Self { label: label.into(), schedule, ..self.clone() }
    }

    fn check(&self) -> Result<SeirdParams<T>, ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidScenario(m.into()));
        if self.horizon == 0 {
            return bad("horizon must be >= 1");
        }
        if !(self.population > T::zero()) || !self.population.is_finite() {
            return bad("population must be > 0");
        }
        if !(self.seed_infected >= T::zero()) || !(self.seed_infected < self.population) {
            return bad("seed_infected must lie in [0, population)");
        }
        if !self.econ.is_valid() {
            return bad("economic parameters must be finite and >= 0");
        }
        let params = SeirdParams { n: self.population, ..self.params };
        params.validate()?;
        self.icu.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScenarioResult<T> {
    pub label: String,
    pub trajectory: Trajectory<T>,
    pub loss: LossBreakdown<T>,
}

impl<T: Real> ScenarioResult<T> {
    pub fn total_cases(&self) -> T {
        self.loss.total_cases
    }

    pub fn total_deaths(&self) -> T {
        self.trajectory.final_state().d
    }

    pub fn total_loss(&self) -> T {
        self.loss.total_loss()
    }
}

/// Validates the schedule, simulates with ICU-driven mortality and prices
/// the outcome. Deterministic.
pub fn run_scenario<T: Real>(s: &Scenario<T>) -> Result<ScenarioResult<T>, ScenarioError> {
    let params = s.check()?;
    validate_schedule(&s.schedule, s.horizon, &s.catalog).map_err(ScenarioError::InvalidSchedule)?;
    let re = re_schedule(params.r0, &s.schedule, &s.catalog, s.horizon)?;
    let init = SeirdState::seeded(s.population, T::zero(), s.seed_infected);
    let trajectory = simulate_with(&init, &params, |d| re[d], Some(&s.icu), s.horizon, s.substeps)?;
    let loss = accumulate(&trajectory, &s.schedule, &s.catalog, &s.econ, s.population)?;
    Ok(ScenarioResult { label: s.label.clone(), trajectory, loss })
}

/// The six reference schedules, split into three equal blocks like the
/// search space: optimal (tracing with distancing throughout, masks in the
/// first block), each single policy throughout, and no policy.
pub fn presets(horizon: usize) -> Vec<(&'static str, PolicySchedule)> {
    use PolicyId::*;
    let bounds: Vec<(usize, usize)> = if horizon >= 3 && horizon % 3 == 0 {
        let m = horizon / 3;
        vec![(0, m), (m, 2 * m), (2 * m, horizon)]
    } else {
        vec![(0, horizon)]
    };
    let plan = |first: Vec<Assignment>, rest: Vec<Assignment>| {
        PolicySchedule::new(
            bounds
                .iter()
                .enumerate()
                .map(|(k, &(a, b))| ScheduleBlock::new(a, b, if k == 0 { first.clone() } else { rest.clone() }))
                .collect(),
        )
    };
    let all = |id| plan(vec![Assignment::new(id, 1.0)], vec![Assignment::new(id, 1.0)]);
    vec![
        (
            "optimal",
            plan(
                vec![Assignment::new(TracingDistancing, 1.0), Assignment::new(MasksHygiene, 1.0)],
                vec![Assignment::new(TracingDistancing, 1.0)],
            ),
        ),
        ("tracing_distancing", all(TracingDistancing)),
        ("lockdown", all(Lockdown)),
        ("distancing", all(Distancing)),
        ("masks_hygiene", all(MasksHygiene)),
        ("none", plan(vec![], vec![])),
    ]
}

/// Seed size whose unmitigated run ends with `target_deaths`, by bisection.
pub fn calibrate_seed_infected<T: Real>(base: &Scenario<T>, target_deaths: T) -> Result<T, ScenarioError> {
    let deaths = |seed: T| -> Result<T, ScenarioError> {
        let s = Scenario { seed_infected: seed, schedule: PolicySchedule::default(), ..base.clone() };
        Ok(run_scenario(&s)?.total_deaths())
    };
    let mut lo = T::zero();
    let mut hi = base.population * T::lit(0.1);
    if deaths(hi)? < target_deaths {
        return Err(ScenarioError::InvalidScenario("target deaths unreachable with up to 10% seeded".into()));
    }
    for _ in 0..100 {
        let mid = (lo + hi) / T::lit(2.0);
        if deaths(mid)? < target_deaths {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < T::lit(1e-6) * (T::one() + hi) {
            break;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub block_length: usize,
    pub policies: Vec<PolicyId>,
    pub levels: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self { block_length: 30, policies: PolicyId::NPIS.to_vec(), levels: INTENSITY_LEVELS.to_vec() }
    }
}

impl SearchSpace {
    /// Closed-form count of feasible assignments for one block: at most one
    /// contact restriction at a nonzero level, anything for the rest.
    pub fn feasible_per_block(&self) -> u128 {
        let nonzero = self.levels.iter().filter(|l| **l != 0.0).count() as u128;
        let contact = self.policies.iter().filter(|p| p.restricts_contacts()).count() as u128;
        let other = (self.policies.len() as u128 - contact) as u32;
        if self.levels.contains(&0.0) {
            (1 + contact * nonzero) * (1 + nonzero).pow(other)
        } else if contact <= 1 {
            nonzero.pow(self.policies.len() as u32)
        } else {
            0
        }
    }

    /// Rejects levels outside {0, 0.5, 1}, repeated entries and policies
    /// missing from the catalog.
    pub fn validate<T: Real>(&self, catalog: &Catalog<T>) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::InvalidScenario(m));
        if let Some(l) = self.levels.iter().find(|l| !INTENSITY_LEVELS.contains(l)) {
            return bad(format!("intensity level {l} not in {{0, 0.5, 1}}"));
        }
        for (k, l) in self.levels.iter().enumerate() {
            if self.levels[..k].contains(l) {
                return bad(format!("intensity level {l} listed twice"));
            }
        }
        for (k, p) in self.policies.iter().enumerate() {
            if self.policies[..k].contains(p) {
                return bad(format!("policy {p} listed twice"));
            }
            if catalog.get(*p).is_none() {
                return bad(format!("policy {p} is not in the catalog"));
            }
        }
        Ok(())
    }

    pub fn feasible_count(&self, horizon: usize) -> Result<u128, ScenarioError> {
        let blocks = self.blocks(horizon)?;
        Ok(self.feasible_per_block().saturating_pow(blocks as u32))
    }

    fn blocks(&self, horizon: usize) -> Result<usize, ScenarioError> {
        if self.block_length == 0 || horizon % self.block_length != 0 {
            return Err(ScenarioError::BlockLength { block_length: self.block_length, horizon });
        }
        Ok(horizon / self.block_length)
    }

    /// Every assignment for one block that passes schedule validation,
    /// in lexicographic order of the level indices.
    pub fn block_assignments<T: Real>(&self, catalog: &Catalog<T>) -> Vec<Vec<Assignment>> {
        let k = self.policies.len();
        let l = self.levels.len();
        let total = l.pow(k as u32);
        let mut out = Vec::new();
        for code in 0..total {
            let mut rem = code;
            let mut idx = vec![0; k];
            for slot in idx.iter_mut().rev() {
                *slot = rem % l;
                rem /= l;
            }
            let assignment: Vec<Assignment> = self
                .policies
                .iter()
                .zip(&idx)
                .filter(|(_, &i)| self.levels[i] != 0.0)
                .map(|(p, &i)| Assignment::new(*p, self.levels[i]))
                .collect();
            let probe = PolicySchedule::new(vec![ScheduleBlock::new(0, 1, assignment.clone())]);
            if validate_schedule(&probe, 1, catalog).is_ok() {
                out.push(assignment);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub cap: usize,
    pub parallel: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_SEARCH_CAP, parallel: true }
    }
}

/// Totals for one evaluated schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScenarioSummary<T> {
    pub encoding: String,
    pub schedule: PolicySchedule,
    pub total_cases: T,
    pub total_deaths: T,
    pub total_loss: T,
}

impl<T: Real> ScenarioSummary<T> {
    pub fn from_result(schedule: &PolicySchedule, r: &ScenarioResult<T>) -> Self {
        Self {
            encoding: schedule.encode(),
            schedule: schedule.clone(),
            total_cases: r.total_cases(),
            total_deaths: r.total_deaths(),
            total_loss: r.total_loss(),
        }
    }
}

/// Runs every feasible schedule and returns them ranked by total loss, ties
/// broken by schedule encoding. Full trajectories are dropped to keep memory
/// flat; rerun [`run_scenario`] on a summary's schedule to get them.
pub fn search_policies<T: Real>(
    space: &SearchSpace,
    base: &Scenario<T>,
    opts: SearchOptions,
) -> Result<Vec<ScenarioSummary<T>>, ScenarioError> {
    base.check()?;
    space.validate(&base.catalog)?;
    let blocks = space.blocks(base.horizon)?;
    let per_block = space.block_assignments(&base.catalog);
    let size = (per_block.len() as u128).checked_pow(blocks as u32).unwrap_or(u128::MAX);
    if size > opts.cap as u128 {
        return Err(ScenarioError::SpaceTooLarge { size, cap: opts.cap });
    }
    let size = size as usize;
    let decode = |mut code: usize| -> PolicySchedule {
        let mut picks = vec![0; blocks];
        for slot in picks.iter_mut().rev() {
            *slot = code % per_block.len();
            code /= per_block.len();
        }
        PolicySchedule::new(
            picks
                .iter()
                .enumerate()
                .map(|(b, &p)| {
                    ScheduleBlock::new(b * space.block_length, (b + 1) * space.block_length, per_block[p].clone())
                })
                .collect(),
        )
    };
    let eval = |code: usize| -> Result<ScenarioSummary<T>, ScenarioError> {
        let schedule = decode(code);
        let s = Scenario { schedule, ..base.clone() };
        let r = run_scenario(&s)?;
        Ok(ScenarioSummary::from_result(&s.schedule, &r))
    };
    let mut out: Vec<ScenarioSummary<T>> = if opts.parallel {
        (0..size).into_par_iter().map(eval).collect::<Result<_, _>>()?
    } else {
        (0..size).map(eval).collect::<Result<_, _>>()?
    };
    out.sort_by(|a, b| {
        a.total_loss
            .partial_cmp(&b.total_loss)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.encoding.cmp(&b.encoding))
    });
    Ok(out)
}

/// Columns: rank, schedule, total_cases, total_deaths, total_loss.
pub fn write_ranked_csv<T: Real, W: Write>(ranked: &[ScenarioSummary<T>], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "schedule", "total_cases", "total_deaths", "total_loss"])?;
    for (k, r) in ranked.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            r.encoding.clone(),
            r.total_cases.as_f64().to_string(),
            r.total_deaths.as_f64().to_string(),
            r.total_loss.as_f64().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disease_free_scenario_costs_only_policy() {
        let base = Scenario::<f64> { seed_infected: 0.0, ..Default::default() };
        let r = run_scenario(&base.with_schedule("masks", PolicySchedule::single(PolicyId::MasksHygiene, 1.0, 0, 90)))
            .unwrap();
        assert_eq!(r.total_cases(), 0.0);
        assert_eq!(r.total_deaths(), 0.0);
        assert_eq!(r.total_loss(), 180_000_000.0);
        assert_eq!(r.loss.totals.infection + r.loss.totals.death + r.loss.totals.tracing, 0.0);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let base = Scenario::<f64>::default();
        let bad = base.with_schedule(
            "bad",
            PolicySchedule::new(vec![ScheduleBlock::new(0, 40, vec![]), ScheduleBlock::new(30, 60, vec![])]),
        );
        let err = run_scenario(&bad).unwrap_err();
        assert_eq!(err.violations().len(), 1);
        assert!(run_scenario(&Scenario { seed_infected: 2e6, ..base.clone() }).is_err());
        assert!(run_scenario(&Scenario { horizon: 0, ..base }).is_err());
    }

    #[test]
    fn tiny_masks_space() {
        let space = SearchSpace { block_length: 90, policies: vec![PolicyId::MasksHygiene], levels: vec![0.0, 1.0] };
        assert_eq!(space.feasible_count(90).unwrap(), 2);
        let ranked = search_policies(&space, &Scenario::<f64>::default(), SearchOptions::default()).unwrap();
        assert_eq!(ranked.len(), 2);
        assert!(ranked[0].total_loss <= ranked[1].total_loss);
        let encodings: Vec<&str> = ranked.iter().map(|r| r.encoding.as_str()).collect();
        assert!(encodings.contains(&"0-90:none") && encodings.contains(&"0-90:masks_hygiene@1"));
    }

    #[test]
    fn default_space_count() {
        let space = SearchSpace::default();
        assert_eq!(space.feasible_per_block(), 21);
        assert_eq!(space.block_assignments(&Catalog::<f64>::default()).len(), 21);
        assert_eq!(space.feasible_count(90).unwrap(), 9_261);
        assert!(space.feasible_count(100).is_err());
        let bad = SearchSpace { levels: vec![0.0, 0.7], ..SearchSpace::default() };
        assert!(bad.validate(&Catalog::<f64>::default()).is_err());
        let vac = SearchSpace { policies: vec![PolicyId::Vaccine], ..SearchSpace::default() };
        assert!(vac.validate(&Catalog::<f64>::default()).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        let err = search_policies(
            &SearchSpace::default(),
            &Scenario::<f64>::default(),
            SearchOptions { cap: 100, parallel: false },
        )
        .unwrap_err();
        assert_eq!(err, ScenarioError::SpaceTooLarge { size: 9_261, cap: 100 });
    }

    #[test]
    fn presets_are_valid() {
        let p = presets(90);
        assert_eq!(p.len(), 6);
        for (_, s) in &p {
            assert!(validate_schedule(s, 90, &Catalog::<f64>::default()).is_ok());
        }
        assert_eq!(
            p[0].1.encode(),
            "0-30:tracing_distancing@1+masks_hygiene@1|30-60:tracing_distancing@1|60-90:tracing_distancing@1"
        );
        assert_eq!(presets(10)[5].1.encode(), "0-10:none");
    }

    #[test]
    fn ranked_csv() {
        let space = SearchSpace { block_length: 90, policies: vec![PolicyId::MasksHygiene], levels: vec![0.0, 1.0] };
        let ranked = search_policies(&space, &Scenario::<f64>::default(), SearchOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_ranked_csv(&ranked, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rank,schedule,total_cases,total_deaths,total_loss\n1,"));
        assert_eq!(text.lines().count(), 3);
    }
}
