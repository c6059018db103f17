//! Dollar losses: policy running costs, treatment, contact tracing and the
//! human-capital value of deaths.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;
use crate::policy::{Catalog, CostKind, PolicyDef, PolicyId, PolicySchedule};
use crate::seird::Trajectory;

pub const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconError {
    #[error("schedule reaches day {schedule_end} but the trajectory covers {horizon} days")]
    HorizonMismatch { schedule_end: usize, horizon: usize },
    #[error("day range {start}..{end} is outside the {horizon}-day trajectory")]
    RangeOutOfBounds { start: usize, end: usize, horizon: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct EconParams<T> {
    /// Dollars per person per year.
    pub gdp_per_capita: T,
    /// Share of annual GDP lost while a full lockdown is in place.
    pub lockdown_gdp_frac: T,
    /// Share of annual GDP lost under distancing (with or without tracing).
    pub distancing_gdp_frac: T,
    /// Dollars per person per day for masks and hygiene.
    pub masks_cost: T,
    /// Dollars per infectious person per day.
    pub infection_cost: T,
    /// Dollars per new case traced.
    pub tracing_cost: T,
    /// Dollars per death.
    pub death_cost: T,
}

impl<T: Real> Default for EconParams<T> {
    fn default() -> Self {
        Self {
            gdp_per_capita: T::lit(30_000.0),
            lockdown_gdp_frac: T::lit(0.10),
            distancing_gdp_frac: T::lit(0.05),
            masks_cost: T::lit(2.0),
            infection_cost: T::lit(300.0),
            tracing_cost: T::lit(6_400.0),
            death_cost: T::lit(7_000_000.0),
        }
    }
}

impl<T: Real> EconParams<T> {
    pub fn is_valid(&self) -> bool {
        [
            self.gdp_per_capita,
            self.lockdown_gdp_frac,
            self.distancing_gdp_frac,
            self.masks_cost,
            self.infection_cost,
            self.tracing_cost,
            self.death_cost,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= T::zero())
    }

    fn gdp_fraction(&self, id: PolicyId) -> T {
        match id {
            PolicyId::Lockdown => self.lockdown_gdp_frac,
            PolicyId::Distancing | PolicyId::TracingDistancing => self.distancing_gdp_frac,
            _ => T::zero(),
        }
    }

    fn per_capita_rate(&self, id: PolicyId) -> T {
        match id {
            PolicyId::MasksHygiene => self.masks_cost,
            _ => T::zero(),
        }
    }
}

/// Running cost of the active policies for one day, excluding per-case tracing.
pub fn daily_policy_cost<T: Real>(active: &[(&PolicyDef<T>, T)], econ: &EconParams<T>, n: T) -> T {
    let year = T::lit(DAYS_PER_YEAR);
    active
        .iter()
        .map(|(p, intensity)| match p.cost_kind {
            CostKind::GdpFractionPerYear => *intensity * econ.gdp_fraction(p.id) * econ.gdp_per_capita * n / year,
            CostKind::PerCapitaPerDay => *intensity * econ.per_capita_rate(p.id) * n,
            CostKind::None => T::zero(),
        })
        .fold(T::zero(), |a, b| a + b)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EpidemicCost<T> {
    pub infection: T,
    pub tracing: T,
    pub death: T,
}

pub fn daily_epidemic_cost<T: Real>(
    i_active: T,
    new_cases: T,
    new_deaths: T,
    tracing_intensity: T,
    econ: &EconParams<T>,
) -> EpidemicCost<T> {
    EpidemicCost {
        infection: econ.infection_cost * i_active,
        tracing: econ.tracing_cost * new_cases * tracing_intensity,
        death: econ.death_cost * new_deaths,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DailyLoss<T> {
    pub policy: T,
    pub infection: T,
    pub tracing: T,
    pub death: T,
    pub total: T,
}

impl<T: Real> DailyLoss<T> {
    fn add(&mut self, o: &Self) {
        self.policy = self.policy + o.policy;
        self.infection = self.infection + o.infection;
        self.tracing = self.tracing + o.tracing;
        self.death = self.death + o.death;
        self.total = self.total + o.total;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LossBreakdown<T> {
    /// First day covered by `daily`.
    pub first_day: usize,
    pub daily: Vec<DailyLoss<T>>,
    /// Running total of `daily[..].total`.
    pub cumulative: Vec<T>,
    pub totals: DailyLoss<T>,
    /// Cumulative new infections (S -> E) over the covered days.
    pub total_cases: T,
    /// Deaths over the covered days.
    pub total_deaths: T,
}

impl<T: Real> LossBreakdown<T> {
    pub fn total_loss(&self) -> T {
        self.totals.total
    }

    /// Columns: day, policy, infection, tracing, death, total, cumulative.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["day", "policy", "infection", "tracing", "death", "total", "cumulative"])?;
        for (k, (d, c)) in self.daily.iter().zip(&self.cumulative).enumerate() {
            w.write_record([
                (self.first_day + k).to_string(),
                d.policy.as_f64().to_string(),
                d.infection.as_f64().to_string(),
                d.tracing.as_f64().to_string(),
                d.death.as_f64().to_string(),
                d.total.as_f64().to_string(),
                c.as_f64().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Losses over the whole trajectory.
pub fn accumulate<T: Real>(
    trajectory: &Trajectory<T>,
    schedule: &PolicySchedule,
    catalog: &Catalog<T>,
    econ: &EconParams<T>,
    n: T,
) -> Result<LossBreakdown<T>, EconError> {
    let horizon = trajectory.horizon();
    if let Some(end) = schedule.blocks.iter().map(|b| b.end).max() {
        if end > horizon {
            return Err(EconError::HorizonMismatch { schedule_end: end, horizon });
        }
    }
    accumulate_range(trajectory, schedule, catalog, econ, n, 0..horizon)
}

/// Losses over `days` only. Infection cost uses occupancy of I at the start
/// of each day; tracing and death costs use that day's flows.
pub fn accumulate_range<T: Real>(
    trajectory: &Trajectory<T>,
    schedule: &PolicySchedule,
    catalog: &Catalog<T>,
    econ: &EconParams<T>,
    n: T,
    days: Range<usize>,
) -> Result<LossBreakdown<T>, EconError> {
    let horizon = trajectory.horizon();
    if days.start > days.end || days.end > horizon {
        return Err(EconError::RangeOutOfBounds { start: days.start, end: days.end, horizon });
    }
    let mut daily = Vec::with_capacity(days.len());
    let mut cumulative = Vec::with_capacity(days.len());
    let mut totals = DailyLoss::default();
    let mut cases = T::zero();
    let mut deaths = T::zero();
    for day in days.clone() {
        let active = catalog.resolve(schedule.active_on(day));
        let tracing_intensity = active
            .iter()
            .filter(|(p, _)| p.traces_cases)
            .map(|(_, i)| *i)
            .fold(T::zero(), |a, b| a + b);
        let flows = &trajectory.flows[day];
        let epi = daily_epidemic_cost(
            trajectory.states[day].i,
            flows.new_infectious,
            flows.new_deaths,
            tracing_intensity,
            econ,
        );
        let policy = daily_policy_cost(&active, econ, n);
        let d = DailyLoss {
            policy,
            infection: epi.infection,
            tracing: epi.tracing,
            death: epi.death,
            total: policy + epi.infection + epi.tracing + epi.death,
        };
        totals.add(&d);
        cumulative.push(totals.total);
        daily.push(d);
        cases = cases + flows.new_exposed;
        deaths = deaths + flows.new_deaths;
    }
    Ok(LossBreakdown { first_day: days.start, daily, cumulative, totals, total_cases: cases, total_deaths: deaths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seird::{simulate, IcuModel, SeirdParams, SeirdState};

    fn cat() -> Catalog<f64> {
        Catalog::default()
    }

    #[test]
    fn policy_cost_examples() {
        let c = cat();
        let econ = EconParams::default();
        let lock = c.get(PolicyId::Lockdown).unwrap();
        let v = daily_policy_cost(&[(lock, 1.0)], &econ, 1e6);
        assert!((v - 8_219_178.082_191_78).abs() < 1e-6, "{v}");
        let masks = c.get(PolicyId::MasksHygiene).unwrap();
        assert_eq!(daily_policy_cost(&[(masks, 1.0)], &econ, 1e6), 2_000_000.0);
        assert_eq!(daily_policy_cost::<f64>(&[], &econ, 1e6), 0.0);
        let td = c.get(PolicyId::TracingDistancing).unwrap();
        let half = daily_policy_cost(&[(td, 0.5)], &econ, 1e6);
        assert!((half - 0.5 * 0.05 * 3e10 / 365.0).abs() < 1e-6);
        let vac = Catalog::<f64>::with_vaccine();
        assert_eq!(daily_policy_cost(&[(vac.get(PolicyId::Vaccine).unwrap(), 1.0)], &econ, 1e6), 0.0);
    }

    #[test]
    fn epidemic_cost_examples() {
        let econ = EconParams::default();
        let c = daily_epidemic_cost(1000.0, 0.0, 0.0, 0.0, &econ);
        assert_eq!((c.infection, c.tracing, c.death), (300_000.0, 0.0, 0.0));
        let c = daily_epidemic_cost(0.0f64, 0.0, 28_018.0, 0.0, &econ);
        assert!((c.death - 196.126e9).abs() < 1.0);
        assert_eq!(daily_epidemic_cost(0.0, 0.0, 0.0, 1.0, &econ), EpidemicCost::default());
        assert_eq!(daily_epidemic_cost(0.0, 10.0, 0.0, 0.5, &econ).tracing, 32_000.0);
    }

    fn quiet(horizon: usize) -> Trajectory<f64> {
        let p = SeirdParams::covid(1e6);
        simulate(&SeirdState::seeded(1e6, 0.0, 0.0), &p, |_| 2.64, Some(&IcuModel::default()), horizon).unwrap()
    }

    #[test]
    fn masks_on_a_quiet_country() {
        let s = PolicySchedule::single(PolicyId::MasksHygiene, 1.0, 0, 90);
        let loss = accumulate(&quiet(90), &s, &cat(), &EconParams::default(), 1e6).unwrap();
        assert_eq!(loss.total_loss(), 180_000_000.0);
        assert_eq!(loss.total_cases, 0.0);
        let none = accumulate(&quiet(90), &PolicySchedule::default(), &cat(), &EconParams::default(), 1e6).unwrap();
        assert_eq!(none.total_loss(), 0.0);
    }

    #[test]
    fn horizon_mismatch() {
        let s = PolicySchedule::single(PolicyId::MasksHygiene, 1.0, 0, 120);
        assert_eq!(
            accumulate(&quiet(90), &s, &cat(), &EconParams::default(), 1e6),
            Err(EconError::HorizonMismatch { schedule_end: 120, horizon: 90 })
        );
    }

    #[test]
    fn csv_has_one_row_per_day() {
        let s = PolicySchedule::single(PolicyId::MasksHygiene, 1.0, 0, 5);
        let loss = accumulate(&quiet(5), &s, &cat(), &EconParams::default(), 1e6).unwrap();
        let mut buf = Vec::new();
        loss.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert_eq!(text.lines().nth(5).unwrap(), "4,2000000,0,0,0,2000000,10000000");
    }
}
