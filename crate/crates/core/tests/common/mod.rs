//! Synthetic data generators shared by the integration tests.
#![allow(dead_code)]

use chrono::{Duration, NaiveDate};
use pandemic::data::{Field, TimeSeries};
use pandemic::inference::{mean_flows, SeirdData, SeirdTheta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StudentT};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Negative binomial as a gamma-Poisson mixture.
pub fn neg_binomial(mean: f64, phi: f64, rng: &mut ChaCha8Rng) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let rate = Gamma::new(phi, mean / phi).unwrap().sample(rng);
    if rate <= 0.0 {
        return 0.0;
    }
    Poisson::new(rate).unwrap().sample(rng)
}

/// Table-1 style parameters with small seeds.
pub fn reference_theta() -> SeirdTheta {
    SeirdTheta { r0: 2.64, recovery_time: 16.33, incubation_time: 5.27, mu: 0.025, e0: 20.0, i0: 10.0 }
}

/// Daily counts drawn around the model flows.
pub fn seird_data(theta: &SeirdTheta, n: f64, days: usize, seed: u64) -> SeirdData {
    let (cases, deaths) = mean_flows(theta, n, days).unwrap();
    let mut r = rng(seed);
    SeirdData {
        confirmed: cases.iter().map(|m| neg_binomial(*m, 10.0, &mut r)).collect(),
        deaths: Some(deaths.iter().map(|m| neg_binomial(*m, 10.0, &mut r)).collect()),
        n,
    }
}

pub fn day(k: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 22).unwrap() + Duration::days(k as i64)
}

/// Running sums of daily counts as a cumulative series starting 2020-01-22.
pub fn cumulative(daily: &[f64], field: Field) -> TimeSeries {
    let mut total = 0.0;
    TimeSeries {
        country: "Testland".into(),
        field,
        dates: (0..daily.len()).map(day).collect(),
        values: daily
            .iter()
            .map(|v| {
                total += v;
                total
            })
            .collect(),
    }
}

/// Piecewise-linear log-cumulative curve on `t in [0, 1]` with StudentT(2)
/// noise, continuous at `tau`.
pub struct Kink {
    pub w1: f64,
    pub w2: f64,
    pub b1: f64,
    pub tau: f64,
    pub scale: f64,
}

impl Kink {
    pub fn b2(&self) -> f64 {
        self.b1 + (self.w1 - self.w2) * self.tau
    }

    pub fn mean(&self, t: f64) -> f64 {
        if t < self.tau {
            self.w1 * t + self.b1
        } else {
            self.w2 * t + self.b2()
        }
    }

    /// `points` cumulative values on consecutive days.
    pub fn series(&self, points: usize, seed: u64) -> TimeSeries {
        let mut r = rng(seed);
        let noise = StudentT::new(2.0).unwrap();
        let values = (0..points)
            .map(|k| {
                let t = k as f64 / (points - 1) as f64;
                let e: f64 = if self.scale > 0.0 { self.scale * noise.sample(&mut r) } else { 0.0 };
                (self.mean(t) + e).exp()
            })
            .collect();
        TimeSeries { country: "Testland".into(), field: Field::Confirmed, dates: (0..points).map(day).collect(), values }
    }

    /// Random kink in the ranges used by the recovery checks.
    pub fn random(r: &mut ChaCha8Rng, span_days: f64) -> Self {
        Kink {
            w1: span_days * r.random_range(0.15..0.35),
            w2: span_days * r.random_range(0.005..0.03),
            b1: r.random_range(3.0..6.0),
            tau: r.random_range(0.35..0.65),
            scale: 0.03,
        }
    }
}
