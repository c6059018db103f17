//! Deterministic SEIRD dynamics.
//!
//! ```text
//! dS/dt = -beta S I / N + alpha R
//! dE/dt =  beta S I / N - sigma E
//! dI/dt =  sigma E - gamma I
//! dR/dt =  gamma (1 - mu) I - alpha R
//! dD/dt =  gamma mu I
//! ```
//!
//! with `beta = Re * gamma`. Integration is forward Euler. Each outflow is
//! capped at the occupancy of its source compartment, so no compartment goes
//! negative and `S + E + I + R + D` is conserved up to rounding.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;

/// Euler substeps per simulated day used by [`simulate`].
pub const DEFAULT_SUBSTEPS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeirdError {
    #[error("non-finite state at day {day}")]
    NonFiniteState { day: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SeirdParams<T> {
    pub r0: T,
    /// Per-day recovery rate, `1 / recovery_time`.
    pub gamma: T,
    /// Per-day incubation rate, `1 / incubation_time`.
    pub sigma: T,
    pub mu: T,
    /// Per-day loss of immunity; 0 means lifelong immunity.
    pub alpha: T,
    pub n: T,
}

impl<T: Real> SeirdParams<T> {
    /// Virus parameters inferred for Sweden: R0 2.64, recovery 16.33 days,
    /// incubation 5.27 days, case fatality 2.5%.
    pub fn covid(n: T) -> Self {
        Self {
            r0: T::lit(2.64),
            gamma: T::lit(1.0 / 16.33),
            sigma: T::lit(1.0 / 5.27),
            mu: T::lit(0.025),
            alpha: T::zero(),
            n,
        }
    }

    pub fn validate(&self) -> Result<(), SeirdError> {
        let finite = [self.r0, self.gamma, self.sigma, self.mu, self.alpha, self.n]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(SeirdError::InvalidInput("parameters must be finite".into()));
        }
        if self.r0 < T::zero() || self.gamma < T::zero() || self.sigma < T::zero() || self.alpha < T::zero() {
            return Err(SeirdError::InvalidInput("rates must be >= 0".into()));
        }
        if self.mu < T::zero() || self.mu > T::one() {
            return Err(SeirdError::InvalidInput("mu must lie in [0, 1]".into()));
        }
        if self.n <= T::zero() {
            return Err(SeirdError::InvalidInput("population must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SeirdState<T> {
    pub s: T,
    pub e: T,
    pub i: T,
    pub r: T,
    pub d: T,
}

impl<T: Real> SeirdState<T> {
    /// Everyone susceptible except `e0` exposed and `i0` infectious.
    pub fn seeded(n: T, e0: T, i0: T) -> Self {
        Self { s: n - e0 - i0, e: e0, i: i0, r: T::zero(), d: T::zero() }
    }

    pub fn total(&self) -> T {
        self.s + self.e + self.i + self.r + self.d
    }

    fn is_finite(&self) -> bool {
        [self.s, self.e, self.i, self.r, self.d].iter().all(|v| v.is_finite())
    }
}

/// Transitions over one step (or one day when summed over substeps).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Flows<T> {
    /// S -> E (new infections).
    pub new_exposed: T,
    /// E -> I (symptom onset, counted as new confirmed cases).
    pub new_infectious: T,
    pub new_recovered: T,
    pub new_deaths: T,
}

impl<T: Real> Flows<T> {
    fn add(&mut self, o: &Self) {
        self.new_exposed = self.new_exposed + o.new_exposed;
        self.new_infectious = self.new_infectious + o.new_infectious;
        self.new_recovered = self.new_recovered + o.new_recovered;
        self.new_deaths = self.new_deaths + o.new_deaths;
    }
}

/// Fatality driven by intensive-care capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct IcuModel<T> {
    /// Share of infectious cases needing intensive care.
    pub icu_fraction: T,
    pub icu_beds_per_capita: T,
    /// Death rate of ICU cases that get a bed.
    pub fatality_treated: T,
    /// Death rate of ICU cases without a bed.
    pub fatality_untreated: T,
}

impl<T: Real> Default for IcuModel<T> {
    fn default() -> Self {
        Self {
            icu_fraction: T::lit(0.06),
            icu_beds_per_capita: T::lit(0.0006),
            fatality_treated: T::lit(0.6),
            fatality_untreated: T::one(),
        }
    }
}

impl<T: Real> IcuModel<T> {
    pub fn validate(&self) -> Result<(), SeirdError> {
        let fields = [
            self.icu_fraction,
            self.icu_beds_per_capita,
            self.fatality_treated,
            self.fatality_untreated,
        ];
        if fields.iter().all(|v| *v >= T::zero() && *v <= T::one()) {
            Ok(())
        } else {
            Err(SeirdError::InvalidInput("ICU parameters must lie in [0, 1]".into()))
        }
    }
}

/// Fatality proportion of infectious cases given current ICU load.
pub fn effective_mortality<T: Real>(i: T, params: &SeirdParams<T>, icu: &IcuModel<T>) -> T {
    let demand = icu.icu_fraction * i;
    let beds = icu.icu_beds_per_capita * params.n;
    let treated = if demand <= T::zero() { T::one() } else { (beds / demand).min(T::one()) };
    icu.icu_fraction * (treated * icu.fatality_treated + (T::one() - treated) * icu.fatality_untreated)
}

/// One forward-Euler step of length `dt` days with reproduction number `re`
/// and fatality `mu_eff`.
pub fn step<T: Real>(
    state: &SeirdState<T>,
    params: &SeirdParams<T>,
    re: T,
    mu_eff: T,
    dt: T,
) -> Result<(SeirdState<T>, Flows<T>), SeirdError> {
    if !(re >= T::zero() && re.is_finite()) {
        return Err(SeirdError::InvalidInput("re must be finite and >= 0".into()));
    }
    if !(dt > T::zero()) {
        return Err(SeirdError::InvalidInput("dt must be > 0".into()));
    }
    let zero = T::zero();
    let st = state;
    if !st.is_finite() || !mu_eff.is_finite() {
        return Err(SeirdError::NonFiniteState { day: 0 });
    }
    let beta = re * params.gamma;
    let infected = (beta * st.s * st.i / params.n * dt).min(st.s).max(zero);
    let onset = (params.sigma * st.e * dt).min(st.e).max(zero);
    let removed = (params.gamma * st.i * dt).min(st.i).max(zero);
    let died = removed * mu_eff;
    let recovered = removed - died;
    let waned = (params.alpha * st.r * dt).min(st.r).max(zero);

    let raw = SeirdState {
        s: st.s - infected + waned,
        e: st.e + infected - onset,
        i: st.i + onset - removed,
        r: st.r + recovered - waned,
        d: st.d + died,
    };
    if !raw.is_finite() {
        return Err(SeirdError::NonFiniteState { day: 0 });
    }
    let next = SeirdState {
        s: raw.s.max(zero),
        e: raw.e.max(zero),
        i: raw.i.max(zero),
        r: raw.r.max(zero),
        d: raw.d.max(zero),
    };
    let flows = Flows { new_exposed: infected, new_infectious: onset, new_recovered: recovered, new_deaths: died };
    Ok((next, flows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Trajectory<T> {
    /// Occupancy at the start of each day, `horizon + 1` entries.
    pub states: Vec<SeirdState<T>>,
    /// Transitions during each day, `horizon` entries.
    pub flows: Vec<Flows<T>>,
    pub re: Vec<T>,
    /// Fatality proportion applied on each day.
    pub mu_eff: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn horizon(&self) -> usize {
        self.flows.len()
    }

    /// Cumulative S -> E inflow over the whole run.
    pub fn total_infections(&self) -> T {
        self.flows.iter().map(|f| f.new_exposed).sum()
    }

    pub fn final_state(&self) -> &SeirdState<T> {
        self.states.last().expect("trajectory has an initial state")
    }

    /// Columns: day, S, E, I, R, D, new_cases, new_deaths, Re. The final row
    /// holds the end state with empty flow columns.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["day", "S", "E", "I", "R", "D", "new_cases", "new_deaths", "Re"])?;
        for (day, st) in self.states.iter().enumerate() {
            let mut rec = vec![
                day.to_string(),
                st.s.as_f64().to_string(),
                st.e.as_f64().to_string(),
                st.i.as_f64().to_string(),
                st.r.as_f64().to_string(),
                st.d.as_f64().to_string(),
            ];
            match (self.flows.get(day), self.re.get(day)) {
                (Some(f), Some(re)) => {
                    rec.push(f.new_infectious.as_f64().to_string());
                    rec.push(f.new_deaths.as_f64().to_string());
                    rec.push(re.as_f64().to_string());
                }
                _ => rec.extend([String::new(), String::new(), String::new()]),
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `horizon` days with [`DEFAULT_SUBSTEPS`] Euler substeps per day.
/// `re_of_day` and the ICU-driven fatality are evaluated once per day.
pub fn simulate<T: Real>(
    init: &SeirdState<T>,
    params: &SeirdParams<T>,
    re_of_day: impl Fn(usize) -> T,
    icu: Option<&IcuModel<T>>,
    horizon: usize,
) -> Result<Trajectory<T>, SeirdError> {
    simulate_with(init, params, re_of_day, icu, horizon, DEFAULT_SUBSTEPS)
}

pub fn simulate_with<T: Real>(
    init: &SeirdState<T>,
    params: &SeirdParams<T>,
    re_of_day: impl Fn(usize) -> T,
    icu: Option<&IcuModel<T>>,
    horizon: usize,
    substeps: usize,
) -> Result<Trajectory<T>, SeirdError> {
    if horizon == 0 {
        return Err(SeirdError::InvalidInput("horizon must be >= 1".into()));
    }
    if substeps == 0 {
        return Err(SeirdError::InvalidInput("substeps must be >= 1".into()));
    }
    params.validate()?;
    if let Some(icu) = icu {
        icu.validate()?;
    }
    let dt = T::one() / T::from_usize(substeps).expect("substep count fits the scalar");

    let mut states = Vec::with_capacity(horizon + 1);
    let mut flows = Vec::with_capacity(horizon);
    let mut res = Vec::with_capacity(horizon);
    let mut mus = Vec::with_capacity(horizon);
    let mut state = *init;
    states.push(state);
    for day in 0..horizon {
        let re = re_of_day(day);
        let mu = match icu {
            Some(icu) => effective_mortality(state.i, params, icu),
            None => params.mu,
        };
        let mut daily = Flows::default();
        for _ in 0..substeps {
            let (next, f) = step(&state, params, re, mu, dt).map_err(|e| match e {
                SeirdError::NonFiniteState { .. } => SeirdError::NonFiniteState { day },
                other => other,
            })?;
            state = next;
            daily.add(&f);
        }
        states.push(state);
        flows.push(daily);
        res.push(re);
        mus.push(mu);
    }
    Ok(Trajectory { states, flows, re: res, mu_eff: mus })
}
