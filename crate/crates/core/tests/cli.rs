//! End-to-end runs of the `lab` binary and config round trips.

use proptest::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::process::{Command, Output};
use trace_lab::cli::Scenario;
use trace_lab::kernels::Cutoff;
use trace_lab::ToricModel;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab")).args(args).env_remove("LAB_THREADS").output().unwrap()
}

fn augmented(checks: Value) -> Value {
    json!({
        "model": {"shifts": [1], "constants": [1]},
        "beta": [1.5, 1],
        "s0": [0, 0],
        "cutoff": {"kind": "gaussian", "sigma": 0.5},
        "lambda_grid": {"min": 1000, "max": 100000},
        "points": [[0.5]],
        "checks": checks
    })
}

fn write_config(dir: &Path, config: &Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_vec_pretty(config).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn minimal_run_writes_a_passing_verdict_and_hashed_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &augmented(json!([{"name": "exponent"}])));
    let out = dir.path().join("out");
    let res = lab(&["run", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let verdicts = read_json(&out.join("verdicts.json"));
    let list = verdicts["verdicts"].as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["name"], "exponent");
    assert_eq!(list[0]["pass"], true);

    let manifest = read_json(&out.join("manifest.json"));
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["path"] == "00_exponent.csv"));
    for f in files {
        let bytes = std::fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }

    let csv = std::fs::read_to_string(out.join("00_exponent.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    for col in ["lambda", "abs", "ln_abs", "tail_bound", "rounding_bound", "terms", "resolved"] {
        assert!(header.split(',').any(|h| h == col), "missing {col} in {header}");
    }
    assert_eq!(csv.lines().count(), 26);
}

#[test]
fn schema_error_exits_one_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &augmented(json!([{"name": "exponent", "tolerance": "wide"}])));
    let res = lab(&["run", &config, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("/checks/0/tolerance"));
}

#[test]
fn empty_checks_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &augmented(json!([])));
    let out = dir.path().join("out");
    let res = lab(&["run", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    assert!(read_json(&out.join("verdicts.json"))["verdicts"].as_array().unwrap().is_empty());
}

#[test]
fn failed_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &augmented(json!([{"name": "exponent", "expected": 0.9}])));
    let res = lab(&["verify", &config]);
    assert_eq!(res.status.code(), Some(2));
    let verdicts: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(verdicts["verdicts"][0]["pass"], false);
}

#[test]
fn spectrum_rows_match_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &augmented(json!([])));
    let res = lab(&["spectrum", &config, "--lambda", "300", "--radius", "4.5"]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8(res.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "level,k_1,lambda_1,lambda_2,weight");

    let model = ToricModel::augmented_cp1();
    let n = 3.25f64.sqrt();
    let center = [300.0 * 1.5 / n, 300.0 / n];
    let want = model.enumerate_spectrum(&center, 4.5).unwrap();
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), want.len());
    let cutoff = Cutoff::gaussian(0.5, 2).unwrap();
    for (row, p) in rows.iter().zip(&want) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[0].parse::<u64>().unwrap(), p.level);
        assert_eq!(cells[1].parse::<u64>().unwrap(), p.offsets[0]);
        let xi: Vec<f64> = center.iter().zip(&p.eigenvalue).map(|(c, l)| c - l).collect();
        let w: f64 = cells[4].parse().unwrap();
        assert!((w - cutoff.hat(&xi).unwrap()).abs() <= 1e-12 * w.abs().max(1e-300));
    }
}

#[test]
fn trace_and_project_emit_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = augmented(json!([]));
    config["lambda_grid"] = json!({"min": 10, "max": 100, "points_per_decade": 4});
    let config = write_config(dir.path(), &config);
    for (cmd, first) in [("trace", "lambda,re,im"), ("project", "lambda,point,s_1,re,im")] {
        let out = dir.path().join(format!("{cmd}.csv"));
        let res = lab(&[cmd, &config, "--out", out.to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(0), "{cmd}");
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with(first), "{cmd}: {text}");
        assert!(text.lines().next().unwrap().ends_with("radius,tail_bound,ln_tail_bound,rounding_bound,ln_rounding_bound,terms,met,resolved"));
        assert_eq!(text.lines().count(), 6);
    }
}

#[test]
fn fit_recovers_a_synthetic_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    let mut text = String::from("lambda,abs\n");
    for j in 0..=20 {
        let l = 10f64.powf(1.0 + j as f64 / 10.0);
        text.push_str(&format!("{l},{}\n", 3.0 * l.sqrt()));
    }
    std::fs::write(&path, text).unwrap();
    let res = lab(&["fit", path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!((report["exponent"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((report["coefficient"].as_f64().unwrap() - 3.0).abs() < 1e-10);
    assert!((report["r_squared"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn missing_config_exits_one() {
    let res = lab(&["verify", "/nonexistent/config.json"]);
    assert_eq!(res.status.code(), Some(1));
}

fn check_strategy() -> impl Strategy<Value = Value> {
    prop_oneof![
        (0.001f64..0.1, 0.01f64..0.2).prop_map(|(t, s)| json!({"name": "exponent", "tolerance": t, "stability_threshold": s})),
        (1e3f64..1e5, 0.001f64..0.1).prop_map(|(l, t)| json!({"name": "coefficient", "lambda": l, "tolerance": t})),
        (-2.0f64..0.0).prop_map(|e| json!({"name": "correction_order", "expected": e})),
        (0.0f64..1.0, 0.1f64..0.5).prop_map(|(h, d)| json!({"name": "rapid_decay", "h0": h, "delta": d})),
        Just(json!({"name": "nonperiod_decay"})),
        (1u64..300).prop_map(|n| json!({"name": "identities", "levels": n})),
    ]
}

proptest! {
    #[test]
    fn scenario_round_trips(
        b in (0.1f64..3.0, 0.1f64..3.0),
        s0 in (-7.0f64..7.0, -7.0f64..7.0),
        sigma in 0.01f64..2.0,
        lo in 1.0f64..1e3,
        span in 1.0f64..1e3,
        ppd in 1u32..30,
        point in 0.0f64..=1.0,
        checks in prop::collection::vec(check_strategy(), 0..4),
        tol in 1e-14f64..1e-6,
        seed in any::<u64>(),
    ) {
        let text = json!({
            "model": {"shifts": [1], "constants": [1]},
            "beta": [b.0, b.1],
            "s0": [s0.0, s0.1],
            "cutoff": {"kind": "gaussian", "sigma": sigma},
            "lambda_grid": {"min": lo, "max": lo * span, "points_per_decade": ppd},
            "points": [[point]],
            "checks": checks,
            "tol": tol,
            "seed": seed
        })
        .to_string();
        let parsed = Scenario::from_json(&text).unwrap();
        let again = Scenario::from_json(&parsed.to_json()).unwrap();
        prop_assert_eq!(&parsed, &again);
        prop_assert_eq!(parsed.digest(), again.digest());
    }
}
