use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pupload(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pupload"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run pupload")
}

#[test]
fn malformed_row_is_reported_with_its_number() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("log.csv"),
        "parcel_id,retailer,carrier,pup,status,entry_iso8601\n\
         p1,r1,c1,pup-1,2,2024-01-01T17:00:00\n\
         p1,r1,c1,pup-1,three,2024-01-02T10:00:00\n",
    )
    .unwrap();
    let out = pupload(tmp.path(), &["fit", "--log", "log.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3"), "{err}");
}

#[test]
fn empty_log_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("log.csv"), "").unwrap();
    let out = pupload(tmp.path(), &["fit", "--log", "log.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn fit_then_forecast_from_saved_models() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(pupload(dir, &["simulate", "--days", "60", "--seed", "4", "--out", "tr"]).status.success());
    let fit = pupload(dir, &["fit", "--log", "tr/events.csv", "--k", "1296", "--out", "m"]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    for f in ["kernel.json", "profile.json", "volumes.csv", "selection.json"] {
        assert!(dir.join("m").join(f).exists(), "{f}");
    }
    let out = pupload(
        dir,
        &[
            "forecast", "--log", "tr/events.csv", "--models", "m", "--k", "1296", "--horizons",
            "13,37", "--out", "f.json",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("f.json")).unwrap()).unwrap();
    let records = records.as_array().unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[1]["j"], 37);
    let mass: f64 = records[0]["pmf"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-9);
}

#[test]
fn invalid_horizon_and_method_exit_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(pupload(dir, &["simulate", "--days", "40", "--out", "tr"]).status.success());
    let out = pupload(dir, &["forecast", "--log", "tr/events.csv", "--k", "720", "--horizons", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pupload(
        dir,
        &["evaluate", "--log", "tr/events.csv", "--load", "tr/load_true.csv", "--methods", "sarima"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn too_short_trace_has_insufficient_history() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(pupload(dir, &["simulate", "--days", "20", "--out", "tr"]).status.success());
    let out = pupload(dir, &["evaluate", "--log", "tr/events.csv", "--load", "tr/load_true.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient history"));
}

#[test]
fn oracle_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pupload(tmp.path(), &["oracle-check", "--count", "40", "--mc", "2", "--out", "o.json"]);
    assert!(out.status.success());
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("o.json")).unwrap()).unwrap();
    assert_eq!(s["instances"], 40);
    assert!(s["max_abs_error"].as_f64().unwrap() <= 1e-12);
}
