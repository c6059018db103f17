mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{app, call};
use serde_json::{json, Value};

fn pandemic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pandemic")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[tokio::test]
async fn simulate_matches_the_service_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = json!({
        "population": 2e6,
        "seed_infected": 5000,
        "params": { "r0": 2.4 },
        "schedule": { "blocks": [{ "start": 30, "end": 60, "policies": [{ "id": "lockdown", "intensity": 0.5 }] }] }
    });
    let file = dir.path().join("scenario.json");
    std::fs::write(&file, scenario.to_string()).unwrap();
    let out = dir.path().join("run");
    let o = pandemic(&["simulate", "--scenario", path(&file), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let (_, resp) = call(&app(), "POST", "/api/simulate", Some(&scenario)).await;
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(serde_json::to_string(&summary["totals"]).unwrap(), serde_json::to_string(&resp["totals"]).unwrap());

    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 92);
    let loss = std::fs::read_to_string(out.join("loss.csv")).unwrap();
    let last: Vec<&str> = loss.lines().last().unwrap().split(',').collect();
    assert_eq!(last[6].parse::<f64>().unwrap(), resp["totals"]["loss"].as_f64().unwrap());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains(&format!("loss ${:.2}", resp["totals"]["loss"].as_f64().unwrap())), "{stdout}");
}

#[test]
fn flags_override_and_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero");
    let o = pandemic(&["simulate", "--seed-infected", "0", "--preset", "lockdown", "--out", path(&out)]);
    assert!(o.status.success());
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["label"], "lockdown");
    assert_eq!(s["totals"]["cases"], 0.0);
    assert_eq!(s["totals"]["deaths"], 0.0);
    assert_eq!(s["totals"]["death_cost"], 0.0);
    assert!(s["totals"]["policy_cost"].as_f64().unwrap() > 0.0);
}

#[test]
fn invalid_schedule_exits_1_with_violations() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    let bad = json!({ "schedule": { "blocks": [
        { "start": 0, "end": 30, "policies": [{ "id": "lockdown", "intensity": 1.0 }, { "id": "distancing", "intensity": 1.0 }] }
    ] } });
    std::fs::write(&file, bad.to_string()).unwrap();
    let o = pandemic(&["simulate", "--scenario", path(&file), "--out", path(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.contains("invalid schedule") && stderr.contains("block 0"), "{stderr}");
    assert!(!dir.path().join("x").exists());
}

#[test]
fn missing_files_exit_1() {
    let o = pandemic(&["fit-changepoint", "--csv", "/nonexistent.csv", "--country", "China", "--out", "/tmp/r.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("/nonexistent.csv"));
    let o = pandemic(&["simulate", "--scenario", "/nonexistent.json", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(1));
    let o = pandemic(&["bogus"]);
    assert_eq!(o.status.code(), Some(2), "clap usage errors");
}

#[tokio::test]
async fn fit_changepoint_writes_report_and_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cases.csv");
    common::write_case_csv(&csv, "Testland");
    let (report, draws, plot) = (dir.path().join("r.json"), dir.path().join("d.csv"), dir.path().join("p.csv"));
    let o = pandemic(&[
        "fit-changepoint", "--csv", path(&csv), "--country", "Testland", "--policy-start", "2020-02-21",
        "--out", path(&report), "--draws", path(&draws), "--plot", path(&plot),
        "--seed", "3", "--warmup", "500", "--samples", "500",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&report);
    assert_eq!(r["policy_start"], "2020-02-21");
    assert_eq!(std::fs::read_to_string(&draws).unwrap().lines().count(), 1 + 4 * 500);
    assert_eq!(std::fs::read_to_string(&plot).unwrap().lines().count(), 61);

    let req = json!({
        "country": "Testland",
        "dates": (0..60).map(common::day).collect::<Vec<_>>(),
        "values": common::kinked_counts(),
        "policy_start": "2020-02-21",
        "seed": 3, "num_warmup": 500, "num_samples": 500,
    });
    let (_, http) = call(&app(), "POST", "/api/changepoint", Some(&req)).await;
    assert_eq!(r, http);
}

#[test]
fn unconverged_fit_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cases.csv");
    common::write_case_csv(&csv, "Testland");
    let report = dir.path().join("r.json");
    let o = pandemic(&[
        "fit-changepoint", "--csv", path(&csv), "--country", "Testland", "--out", path(&report),
        "--warmup", "0", "--samples", "10", "--seed", "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("R-hat"));
    assert_eq!(read_json(&report)["converged"], false);
}

#[test]
fn fit_seird_rejects_short_windows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cases.csv");
    common::write_case_csv(&csv, "Testland");
    let o = pandemic(&[
        "fit-seird", "--csv", path(&csv), "--country", "Testland", "--population", "1e6",
        "--to", "2020-02-05", "--out", path(&dir.path().join("s.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("at least 21 days"));
}

#[test]
fn fit_seird_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cases.csv");
    common::write_case_csv(&csv, "Testland");
    let out = dir.path().join("s.json");
    let o = pandemic(&[
        "fit-seird", "--csv", path(&csv), "--country", "Testland", "--population", "1e6",
        "--warmup", "150", "--samples", "100", "--chains", "2", "--out", path(&out),
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    assert_eq!(r["country"], "Testland");
    for key in ["recovery_time_days", "incubation_time_days", "r0", "case_fatality"] {
        assert!(r["report"][key]["mean"].as_f64().unwrap() > 0.0, "{key}");
    }
}

#[tokio::test]
async fn search_matches_the_service() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, js) = (dir.path().join("ranked.csv"), dir.path().join("ranked.json"));
    let o = pandemic(&[
        "search", "--block-length", "45", "--policies", "masks_hygiene,distancing", "--top-k", "5",
        "--out", path(&csv), "--json", path(&js),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let req = json!({ "top_k": 5, "space": { "block_length": 45, "policies": ["masks_hygiene", "distancing"] } });
    let (_, http) = call(&app(), "POST", "/api/search", Some(&req)).await;
    assert_eq!(read_json(&js), http);
    assert_eq!(http["evaluated"], 81);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("rank,schedule,total_cases,total_deaths,total_loss\n1,"));
    let o = pandemic(&["search", "--cap", "100"]);
    assert_eq!(o.status.code(), Some(1));
}
