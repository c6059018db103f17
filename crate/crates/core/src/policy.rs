//! Intervention catalog, schedules and composition into a daily reproduction
//! number.
//!
//! Simultaneous policies combine multiplicatively: each active policy leaves
//! a `1 - intensity * efficiency` share of transmission in place.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;

/// Allowed intensities: not applied, partially applied, fully applied.
pub const INTENSITY_LEVELS: [f64; 3] = [0.0, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyId {
    Lockdown,
    Distancing,
    TracingDistancing,
    MasksHygiene,
    Vaccine,
}

impl PolicyId {
    /// The four non-pharmaceutical interventions that carry a cost model.
    pub const NPIS: [PolicyId; 4] = [
        PolicyId::Lockdown,
        PolicyId::Distancing,
        PolicyId::TracingDistancing,
        PolicyId::MasksHygiene,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyId::Lockdown => "lockdown",
            PolicyId::Distancing => "distancing",
            PolicyId::TracingDistancing => "tracing_distancing",
            PolicyId::MasksHygiene => "masks_hygiene",
            PolicyId::Vaccine => "vaccine",
        }
    }

    /// Lockdown, distancing and tracing-with-distancing all restrict contacts;
    /// at most one of them may be active at a time.
    pub fn restricts_contacts(self) -> bool {
        matches!(self, PolicyId::Lockdown | PolicyId::Distancing | PolicyId::TracingDistancing)
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown policy {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    GdpFractionPerYear,
    PerCapitaPerDay,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PolicyDef<T> {
    pub id: PolicyId,
    /// Fractional reduction in transmission when fully applied.
    pub efficiency: T,
    /// How running costs are charged; rates live in `EconParams`.
    pub cost_kind: CostKind,
    /// Charged per new case on top of the running cost.
    pub traces_cases: bool,
    /// Days between a block starting and its effect on transmission.
    #[serde(default)]
    pub lag_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Catalog<T> {
    pub policies: Vec<PolicyDef<T>>,
}

impl<T: Real> Default for Catalog<T> {
    /// Per-category averages of the fitted efficiencies, with running costs.
    fn default() -> Self {
        let def = |id, eff: f64, cost_kind, traces_cases| PolicyDef {
            id,
            efficiency: T::lit(eff),
            cost_kind,
            traces_cases,
            lag_days: 0,
        };
        Self {
            policies: vec![
                def(PolicyId::Lockdown, 0.96, CostKind::GdpFractionPerYear, false),
                def(PolicyId::Distancing, 0.74, CostKind::GdpFractionPerYear, false),
                def(PolicyId::TracingDistancing, 0.96, CostKind::GdpFractionPerYear, true),
                def(PolicyId::MasksHygiene, 0.30, CostKind::PerCapitaPerDay, false),
            ],
        }
    }
}

impl<T: Real> Catalog<T> {
    /// Default catalog plus a cost-free vaccine entry (efficiency 0.81).
    pub fn with_vaccine() -> Self {
        let mut c = Self::default();
        c.policies.push(PolicyDef {
            id: PolicyId::Vaccine,
            efficiency: T::lit(0.81),
            cost_kind: CostKind::None,
            traces_cases: false,
            lag_days: 0,
        });
        c
    }

    pub fn get(&self, id: PolicyId) -> Option<&PolicyDef<T>> {
        self.policies.iter().find(|p| p.id == id)
    }

    pub fn get_mut(&mut self, id: PolicyId) -> Option<&mut PolicyDef<T>> {
        self.policies.iter_mut().find(|p| p.id == id)
    }

    pub fn set_lag(&mut self, days: usize) {
        self.policies.iter_mut().for_each(|p| p.lag_days = days);
    }

    /// Catalog entries paired with their intensities, skipping unknown ids.
    pub fn resolve<'a>(&'a self, assignments: &[Assignment]) -> Vec<(&'a PolicyDef<T>, T)> {
        assignments
            .iter()
            .filter_map(|a| self.get(a.id).map(|p| (p, T::lit(a.intensity))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: PolicyId,
    pub intensity: f64,
}

impl Assignment {
    pub fn new(id: PolicyId, intensity: f64) -> Self {
        Self { id, intensity }
    }
}

/// Policies applied on days `start..end` (end exclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleBlock {
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub policies: Vec<Assignment>,
}

impl ScheduleBlock {
    pub fn new(start: usize, end: usize, policies: Vec<Assignment>) -> Self {
        Self { start, end, policies }
    }

    pub fn contains(&self, day: usize) -> bool {
        (self.start..self.end).contains(&day)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicySchedule {
    #[serde(default)]
    pub blocks: Vec<ScheduleBlock>,
}

impl PolicySchedule {
    pub fn new(blocks: Vec<ScheduleBlock>) -> Self {
        Self { blocks }
    }

    /// One policy at a fixed intensity on `start..end`.
    pub fn single(id: PolicyId, intensity: f64, start: usize, end: usize) -> Self {
        Self::new(vec![ScheduleBlock::new(start, end, vec![Assignment::new(id, intensity)])])
    }

    /// Assignments active on `day`, ignoring lags.
    pub fn active_on(&self, day: usize) -> &[Assignment] {
        self.blocks
            .iter()
            .find(|b| b.contains(day))
            .map(|b| b.policies.as_slice())
            .unwrap_or(&[])
    }

    /// Compact text form, e.g. `0-30:tracing_distancing@1+masks_hygiene@1|30-90:none`.
    /// Zero-intensity assignments are omitted.
    pub fn encode(&self) -> String {
        let mut blocks: Vec<&ScheduleBlock> = self.blocks.iter().collect();
        blocks.sort_by_key(|b| (b.start, b.end));
        blocks
            .iter()
            .map(|b| {
                let mut active: Vec<&Assignment> =
                    b.policies.iter().filter(|a| a.intensity != 0.0).collect();
                active.sort_by_key(|a| a.id);
                let body = if active.is_empty() {
                    "none".to_string()
                } else {
                    active
                        .iter()
                        .map(|a| format!("{}@{}", a.id, a.intensity))
                        .collect::<Vec<_>>()
                        .join("+")
                };
                format!("{}-{}:{}", b.start, b.end, body)
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    EmptyBlock,
    OutOfRange,
    Overlap,
    BadIntensity,
    DuplicatePolicy,
    UnknownPolicy,
    LockdownWithDistancing,
    ConflictingContactPolicies,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: RuleId,
    /// Index of the offending block in the schedule.
    pub block: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("schedule blocks {0} and {1} overlap")]
    OverlappingBlocks(usize, usize),
    #[error("schedule block {block} lies outside the {horizon}-day horizon")]
    BlockOutOfRange { block: usize, horizon: usize },
    #[error("invalid schedule: {}", summarize(.0))]
    Invalid(Vec<Violation>),
    #[error("r0 must be > 0")]
    NonPositiveR0,
}

fn summarize(v: &[Violation]) -> String {
    v.iter().map(|x| x.message.as_str()).collect::<Vec<_>>().join("; ")
}

impl PolicyError {
    pub fn violations(&self) -> Vec<Violation> {
        match self {
            PolicyError::Invalid(v) => v.clone(),
            PolicyError::OverlappingBlocks(a, b) => vec![Violation {
                rule: RuleId::Overlap,
                block: *b,
                message: format!("blocks {a} and {b} overlap"),
            }],
            PolicyError::BlockOutOfRange { block, horizon } => vec![Violation {
                rule: RuleId::OutOfRange,
                block: *block,
                message: format!("block {block} extends past day {horizon}"),
            }],
            PolicyError::NonPositiveR0 => Vec::new(),
        }
    }
}

/// `r0 * prod(1 - intensity * efficiency)`. Factors are multiplied in sorted
/// order so the result is bit-identical under any ordering of `active`.
pub fn compose_re<T: Real>(r0: T, active: &[(&PolicyDef<T>, T)]) -> T {
    let mut factors: Vec<T> = active.iter().map(|(p, intensity)| T::one() - *intensity * p.efficiency).collect();
    factors.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    factors.into_iter().fold(r0, |re, f| re * f)
}

/// Checks every schedule rule and returns all violations found.
pub fn validate_schedule<T: Real>(
    schedule: &PolicySchedule,
    horizon: usize,
    catalog: &Catalog<T>,
) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let mut push = |rule, block, message: String| out.push(Violation { rule, block, message });

    for (k, b) in schedule.blocks.iter().enumerate() {
        if b.start >= b.end {
            push(RuleId::EmptyBlock, k, format!("block {k}: start {} is not before end {}", b.start, b.end));
        }
        if b.end > horizon {
            push(RuleId::OutOfRange, k, format!("block {k}: end {} exceeds horizon {horizon}", b.end));
        }
        let mut seen = BTreeSet::new();
        for a in &b.policies {
            if !INTENSITY_LEVELS.contains(&a.intensity) {
                push(
                    RuleId::BadIntensity,
                    k,
                    format!("block {k}: {} intensity {} not in {{0, 0.5, 1}}", a.id, a.intensity),
                );
            }
            if !seen.insert(a.id) {
                push(RuleId::DuplicatePolicy, k, format!("block {k}: {} listed twice", a.id));
            }
            if catalog.get(a.id).is_none() {
                push(RuleId::UnknownPolicy, k, format!("block {k}: {} is not in the catalog", a.id));
            }
        }
        let contact: Vec<PolicyId> = b
            .policies
            .iter()
            .filter(|a| a.intensity > 0.0 && a.id.restricts_contacts())
            .map(|a| a.id)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if contact.contains(&PolicyId::Lockdown) && contact.contains(&PolicyId::Distancing) {
            push(
                RuleId::LockdownWithDistancing,
                k,
                format!("block {k}: lockdown already subsumes distancing"),
            );
        } else if contact.len() > 1 {
            let names: Vec<&str> = contact.iter().map(|p| p.as_str()).collect();
            push(
                RuleId::ConflictingContactPolicies,
                k,
                format!("block {k}: at most one contact restriction allowed, got {}", names.join(", ")),
            );
        }
    }
    for a in 0..schedule.blocks.len() {
        for b in a + 1..schedule.blocks.len() {
            let (x, y) = (&schedule.blocks[a], &schedule.blocks[b]);
            if x.start < y.end && y.start < x.end && x.start < x.end && y.start < y.end {
                push(RuleId::Overlap, b, format!("blocks {a} and {b} overlap"));
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Daily reproduction number over `0..horizon`. A policy with lag `L` in
/// block `start..end` acts on days `start + L..end + L`.
pub fn re_schedule<T: Real>(
    r0: T,
    schedule: &PolicySchedule,
    catalog: &Catalog<T>,
    horizon: usize,
) -> Result<Vec<T>, PolicyError> {
    if !(r0 > T::zero()) {
        return Err(PolicyError::NonPositiveR0);
    }
    for (k, b) in schedule.blocks.iter().enumerate() {
        if b.end > horizon {
            return Err(PolicyError::BlockOutOfRange { block: k, horizon });
        }
        if let Some(j) = (0..k).find(|&j| {
            let o = &schedule.blocks[j];
            o.start < b.end && b.start < o.end
        }) {
            return Err(PolicyError::OverlappingBlocks(j, k));
        }
    }
    validate_schedule(schedule, horizon, catalog).map_err(PolicyError::Invalid)?;

    let mut active: Vec<Vec<(&PolicyDef<T>, T)>> = vec![Vec::new(); horizon];
    for b in &schedule.blocks {
        for (def, intensity) in catalog.resolve(&b.policies) {
            let lo = (b.start + def.lag_days).min(horizon);
            let hi = (b.end + def.lag_days).min(horizon);
            for day in &mut active[lo..hi] {
                day.push((def, intensity));
            }
        }
    }
    Ok(active.iter().map(|a| compose_re(r0, a)).collect())
}
