use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_censor-lab"))
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(config: &Path, out: &Path) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, doc: &Value) -> PathBuf {
    let path = dir.join(format!("{}.json", doc["name"].as_str().unwrap()));
    fs::write(&path, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn diagnostic(out: &Output) -> Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

#[test]
fn every_sample_scenario_runs() {
    let out = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        let res = run(&path, out.path());
        assert_eq!(
            res.status.code(),
            Some(0),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&res.stderr)
        );
    }
}

#[test]
fn unmonitored_censor_writes_unit_threshold() {
    let out = tempfile::tempdir().unwrap();
    let res = run(&scenarios_dir().join("unmonitored_censor.json"), out.path());
    assert_eq!(res.status.code(), Some(0));
    let csv = fs::read_to_string(out.path().join("unmonitored_censor.results.csv")).unwrap();
    assert!(!csv.contains('\r'));
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(lines.next(), None);
    let k = header.iter().position(|h| *h == "l_vt").unwrap();
    assert_eq!(row[k].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn rate_sweep_is_three_monotone_rows() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&scenarios_dir().join("statics_rate_sweep.json"), out.path())
            .status
            .code(),
        Some(0)
    );
    let csv = fs::read_to_string(out.path().join("statics_rate_sweep.results.csv")).unwrap();
    let rhs: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rhs.len(), 3);
    assert!(rhs.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn missing_sigma_exits_two_and_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = read_json(&scenarios_dir().join("sentiment_max.json"));
    doc["name"] = json!("no_sigma");
    doc["parameters"]["market_params"]
        .as_object_mut()
        .unwrap()
        .remove("sigma");
    let res = run(&write_config(dir.path(), &doc), dir.path());
    assert_eq!(res.status.code(), Some(2));
    let d = diagnostic(&res);
    assert_eq!(d["key"], "market_params.sigma");
    assert_eq!(d["kind"], "validation");
    assert!(!dir.path().join("no_sigma.results.json").exists());
}

#[test]
fn missing_config_and_bad_json_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&dir.path().join("absent.json"), dir.path())
            .status
            .code(),
        Some(2)
    );
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run(&bad, dir.path()).status.code(), Some(2));
}

#[test]
fn existence_failure_exits_three_with_flag() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "name": "covered_bad_news",
        "mode": "censor",
        "parameters": {
            "scheme": { "window": [0.0, 1.0], "continuous_intervals": [[0.0, 1.0]] },
            "rule": { "signature": -1, "markup": 0.0 },
            "firm_params": { "mu": 0.0, "sigma": 0.2 },
            "vt_label": 1.0
        }
    });
    let res = run(&write_config(dir.path(), &doc), dir.path());
    assert_eq!(res.status.code(), Some(3));
    let d = diagnostic(&res);
    assert_eq!(d["kind"], "existence");
    assert_eq!(d["failed_flags"][0], "(3) vol(C) != T-t");
}

#[test]
fn results_round_trip_as_config() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    for name in [
        "mixed_scheme_censor",
        "sentiment_max",
        "sigma_sweep",
        "statics_rate_sweep",
    ] {
        assert_eq!(
            run(&scenarios_dir().join(format!("{name}.json")), first.path())
                .status
                .code(),
            Some(0)
        );
        let produced = first.path().join(format!("{name}.results.json"));
        assert_eq!(run(&produced, second.path()).status.code(), Some(0));
        let again = second.path().join(format!("{name}.results.json"));
        assert_eq!(
            fs::read(&produced).unwrap(),
            fs::read(&again).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn csv_and_json_carry_the_same_numbers() {
    let out = tempfile::tempdir().unwrap();
    for name in ["mixed_scheme_censor", "sigma_sweep"] {
        assert_eq!(
            run(&scenarios_dir().join(format!("{name}.json")), out.path())
                .status
                .code(),
            Some(0)
        );
        let doc = read_json(&out.path().join(format!("{name}.results.json")));
        let csv = fs::read_to_string(out.path().join(format!("{name}.results.csv"))).unwrap();
        let rows: Vec<Vec<String>> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(String::from).collect())
            .collect();
        let table = doc["table"]["rows"].as_array().unwrap();
        assert_eq!(rows.len(), table.len());
        for (csv_row, json_row) in rows.iter().zip(table) {
            for (c, j) in csv_row.iter().zip(json_row.as_array().unwrap()) {
                if let Some(v) = j.as_f64() {
                    assert_eq!(
                        c.parse::<f64>().unwrap().to_bits(),
                        v.to_bits(),
                        "{name}: {c} vs {j}"
                    );
                }
            }
        }
    }
}

fn verify(out: &Path, extra: &[&str], threads: &str) -> Output {
    bin()
        .args(["verify", "--out"])
        .arg(out)
        .args(extra)
        .env("CENSOR_LAB_THREADS", threads)
        .output()
        .unwrap()
}

#[test]
fn verify_is_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--paths", "8000", "--steps", "100", "--seed", "11"];
    assert_eq!(verify(a.path(), &args, "1").status.code(), Some(0));
    assert_eq!(verify(b.path(), &args, "4").status.code(), Some(0));
    let ja = fs::read(a.path().join("verify.results.json")).unwrap();
    assert_eq!(ja, fs::read(b.path().join("verify.results.json")).unwrap());
    assert_eq!(
        fs::read(a.path().join("verify.results.csv")).unwrap(),
        fs::read(b.path().join("verify.results.csv")).unwrap()
    );
}

#[test]
fn verify_with_ten_paths_passes() {
    let out = tempfile::tempdir().unwrap();
    let res = verify(
        out.path(),
        &["--paths", "10", "--steps", "100", "--seed", "0"],
        "2",
    );
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}

#[test]
fn zero_band_fails_with_cases() {
    let out = tempfile::tempdir().unwrap();
    let res = verify(
        out.path(),
        &["--paths", "1000", "--steps", "50", "--band-scale", "0"],
        "2",
    );
    assert_eq!(res.status.code(), Some(3));
    let d = diagnostic(&res);
    assert!(!d["failed_cases"].as_array().unwrap().is_empty());
    let doc = read_json(&out.path().join("verify.results.json"));
    assert_eq!(doc["passed"], false);
}

#[test]
fn invalid_verify_config_exits_two() {
    let out = tempfile::tempdir().unwrap();
    let res = verify(out.path(), &["--paths", "10", "--batches", "3"], "1");
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(diagnostic(&res)["key"], "mc.batches");
}
