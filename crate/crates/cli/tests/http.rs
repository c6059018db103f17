mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use common::{app, call, day, kinked_counts};
use http_body_util::BodyExt;
use pandemic_cli::config::AppConfig;
use serde_json::{json, Value};
use tower::ServiceExt;

#[tokio::test]
async fn health_and_catalog() {
    let app = app();
    let (status, body) = call(&app, "GET", "/healthz", None).await;
    assert_eq!((status, body), (StatusCode::OK, json!({ "status": "ok" })));

    let (status, body) = call(&app, "GET", "/api/policies", None).await;
    assert_eq!(status, StatusCode::OK);
    let list = body["policies"].as_array().unwrap();
    let pairs: Vec<(String, f64)> =
        list.iter().map(|p| (p["id"].as_str().unwrap().to_string(), p["efficiency"].as_f64().unwrap())).collect();
    let want = [("lockdown", 0.96), ("distancing", 0.74), ("tracing_distancing", 0.96), ("masks_hygiene", 0.30)];
    assert_eq!(pairs, want.map(|(i, e)| (i.to_string(), e)).to_vec());
}

#[tokio::test]
async fn simulate_totals_match_the_dailies() {
    let (status, body) = call(&app(), "POST", "/api/simulate", Some(&json!({}))).await;
    assert_eq!(status, StatusCode::OK);
    let horizon = 90;
    assert_eq!(body["trajectory"]["states"].as_array().unwrap().len(), horizon + 1);
    assert_eq!(body["trajectory"]["flows"].as_array().unwrap().len(), horizon);
    let daily = body["loss"]["daily"].as_array().unwrap();
    let sum = |k: &str| daily.iter().map(|d| d[k].as_f64().unwrap()).sum::<f64>();
    let totals = &body["totals"];
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
    assert!(close(sum("total"), totals["loss"].as_f64().unwrap()));
    assert!(close(sum("death"), totals["death_cost"].as_f64().unwrap()));
    assert!(close(sum("infection"), totals["infection_cost"].as_f64().unwrap()));
    let cases: f64 = body["trajectory"]["flows"].as_array().unwrap().iter().map(|f| f["new_exposed"].as_f64().unwrap()).sum();
    assert!(close(cases, totals["cases"].as_f64().unwrap()));
    let last = &body["trajectory"]["states"][horizon];
    assert_eq!(last["d"], totals["deaths"]);
    assert_eq!(body["label"], "custom");
}

#[tokio::test]
async fn presets_rank_in_order() {
    let app = app();
    let mut losses = Vec::new();
    for name in ["optimal", "tracing_distancing", "lockdown", "distancing", "masks_hygiene", "none"] {
        let (status, body) = call(&app, "POST", "/api/simulate", Some(&json!({ "preset": name }))).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        assert_eq!(body["label"], name);
        losses.push(body["totals"]["loss"].as_f64().unwrap());
    }
    assert!(losses.windows(2).all(|w| w[0] < w[1]), "{losses:?}");
}

#[tokio::test]
async fn invalid_requests_are_400() {
    let app = app();
    let bad_schedule = json!({ "schedule": { "blocks": [
        { "start": 0, "end": 40, "policies": [{ "id": "lockdown", "intensity": 1.0 }] },
        { "start": 30, "end": 60, "policies": [{ "id": "distancing", "intensity": 0.5 }] }
    ] } });
    let (status, body) = call(&app, "POST", "/api/simulate", Some(&bad_schedule)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "invalid_request");
    assert_eq!(body["violations"][0]["rule"], "overlap");
    assert_eq!(body["violations"][0]["block"], 1);

    let (status, body) = call(&app, "POST", "/api/simulate", Some(&json!({ "populaton": 5 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["message"].as_str().unwrap().contains("populaton"));

    let req = Request::post("/api/simulate").body(Body::from("{not json")).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);

    let (status, _) = call(&app, "POST", "/api/simulate", Some(&json!({ "seed_infected": 2e6 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn search_returns_top_k() {
    let app = app();
    let (status, body) = call(&app, "POST", "/api/search", Some(&json!({}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["evaluated"], 9261);
    let ranked = body["ranked"].as_array().unwrap();
    assert_eq!(ranked.len(), 20);
    assert_eq!(
        ranked[0]["encoding"],
        "0-30:tracing_distancing@1+masks_hygiene@1|30-60:tracing_distancing@1|60-90:tracing_distancing@1"
    );
    let (_, optimal) = call(&app, "POST", "/api/simulate", Some(&json!({ "preset": "optimal" }))).await;
    assert_eq!(ranked[0]["total_loss"], optimal["totals"]["loss"]);

    let small = json!({ "top_k": 3, "space": { "block_length": 45, "policies": ["masks_hygiene"] } });
    let (status, body) = call(&app, "POST", "/api/search", Some(&small)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((body["evaluated"].as_u64(), body["ranked"].as_array().unwrap().len()), (Some(9), 3));
}

#[tokio::test]
async fn oversized_search_is_413() {
    let capped = pandemic_cli::server::router(AppConfig { search_cap: 1000, ..Default::default() });
    let (status, body) = call(&capped, "POST", "/api/search", Some(&json!({}))).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!((body["size"].as_f64(), body["cap"].as_u64()), (Some(9261.0), Some(1000)));
    let (status, _) = call(&app(), "POST", "/api/search", Some(&json!({ "cap": 10 }))).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
    let (status, _) = call(&app(), "POST", "/api/search", Some(&json!({ "space": { "block_length": 7 } }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

fn series_request(extra: Value) -> Value {
    let counts = kinked_counts();
    let mut req = json!({
        "country": "Testland",
        "dates": (0..counts.len()).map(day).collect::<Vec<_>>(),
        "values": counts,
        "policy_start": day(30),
        "seed": 3,
        "num_warmup": 500,
        "num_samples": 500,
    });
    req.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    req
}

#[tokio::test]
async fn changepoint_fit_over_http() {
    let (status, body) = call(&app(), "POST", "/api/changepoint", Some(&series_request(json!({})))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["country"], "Testland");
    assert_eq!(body["converged"], true);
    let change = body["change_date"].as_str().unwrap();
    assert!(("2020-02-25".."2020-03-03").contains(&change), "{change}");
    assert_eq!(body["take_effect_days"].as_i64().unwrap(), (chrono::NaiveDate::parse_from_str(change, "%Y-%m-%d").unwrap() - day(30)).num_days());
    let eff = body["efficiency"]["mean"].as_f64().unwrap();
    assert!((eff - 0.96).abs() < 0.02, "{eff}");
}

#[tokio::test]
async fn changepoint_errors() {
    let app = app();
    let short = json!({ "dates": [day(0), day(1), day(2)], "values": [1, 2, 4] });
    let (status, body) = call(&app, "POST", "/api/changepoint", Some(&short)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["message"].as_str().unwrap().contains("at least"));

    let src = json!({ "source": { "file": "cases.csv", "country": "Testland" } });
    let (status, body) = call(&app, "POST", "/api/changepoint", Some(&src)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["message"].as_str().unwrap().contains("data directory"));

    let rough = series_request(json!({ "num_warmup": 0, "num_samples": 10, "seed": 1 }));
    let (status, body) = call(&app, "POST", "/api/changepoint", Some(&rough)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["error"], "not_converged");
    assert!(body["max_rhat"].as_f64().unwrap() >= 1.05);
    assert_eq!(body["report"]["converged"], false);
}

#[tokio::test]
async fn changepoint_from_the_data_directory() {
    let dir = tempfile::tempdir().unwrap();
    common::write_case_csv(&dir.path().join("cases.csv"), "Testland");
    let app = pandemic_cli::server::router(AppConfig { data_dir: Some(dir.path().into()), ..Default::default() });
    let req = json!({ "source": { "file": "cases.csv", "country": "Testland" }, "num_warmup": 500, "num_samples": 500, "seed": 3 });
    let (status, from_file) = call(&app, "POST", "/api/changepoint", Some(&req)).await;
    assert_eq!(status, StatusCode::OK, "{from_file}");
    let inline = series_request(json!({ "policy_start": null }));
    let (_, inline) = call(&app, "POST", "/api/changepoint", Some(&inline)).await;
    assert_eq!(from_file["tau"], inline["tau"]);
    assert_eq!(from_file["efficiency"], inline["efficiency"]);
}

#[tokio::test]
async fn cors_allows_the_ui() {
    let app = pandemic_cli::server::router(AppConfig {
        cors_origin: Some("http://localhost:5173".into()),
        ..Default::default()
    });
    let req = Request::get("/api/policies").header("origin", "http://localhost:5173").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "http://localhost:5173");
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/simulate")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(resp.status().is_success());
    let _ = resp.into_body().collect().await.unwrap();
}

#[tokio::test]
async fn concurrent_requests_match_serial() {
    let app = app();
    let bodies: Vec<Value> = ["optimal", "lockdown", "none", "masks_hygiene"]
        .iter()
        .enumerate()
        .map(|(k, p)| json!({ "preset": p, "seed_infected": 1000.0 * (k + 1) as f64 }))
        .collect();
    let mut serial = Vec::new();
    for b in &bodies {
        serial.push(call(&app, "POST", "/api/simulate", Some(b)).await.1);
    }
    let mut set = tokio::task::JoinSet::new();
    for (k, b) in bodies.iter().cycle().take(12).cloned().enumerate() {
        let app = app.clone();
        set.spawn(async move { (k % 4, call(&app, "POST", "/api/simulate", Some(&b)).await.1) });
    }
    while let Some(res) = set.join_next().await {
        let (k, body) = res.unwrap();
        assert_eq!(body, serial[k]);
    }
}
