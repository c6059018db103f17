//! Helpers shared by the service and command-line tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{Duration, NaiveDate};
use http_body_util::BodyExt;
use pandemic_cli::config::AppConfig;
use serde_json::Value;
use tower::ServiceExt;

pub fn app() -> Router {
    pandemic_cli::server::router(AppConfig::default())
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<&Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let json = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, json)
}

pub fn day(k: usize) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 22).unwrap() + Duration::days(k as i64)
}

/// Cumulative counts bending from a steep to a shallow log-linear slope on
/// day 36 of 60, with a deterministic wobble. Non-decreasing, so CSV
/// cleaning leaves them unchanged.
pub fn kinked_counts() -> Vec<f64> {
    let mut high = 0.0f64;
    (0..60)
        .map(|k| {
            let t = k as f64 / 59.0;
            let (w1, w2, tau) = (15.0, 0.6, 0.6);
            let y = if t < tau { 1.0 + w1 * t } else { 1.0 + (w1 - w2) * tau + w2 * t };
            high = high.max((y + 0.02 * (k as f64 * 1.7).sin()).exp().round());
            high
        })
        .collect()
}

/// Case CSV with one country following [`kinked_counts`].
pub fn write_case_csv(path: &Path, country: &str) {
    let mut text = String::from("Province/State,Country/Region,Date,Confirmed,Deaths,Recovered\n");
    for (k, c) in kinked_counts().iter().enumerate() {
        writeln!(text, ",{country},{},{c},{},0", day(k), (c * 0.02).floor()).unwrap();
    }
    std::fs::write(path, text).unwrap();
}
