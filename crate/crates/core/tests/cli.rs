use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relaysleep::cli::slots_csv;
use relaysleep::policy::evaluate_policy;
use relaysleep::{Problem, Scenario};

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/default_reduced_dp.csv");

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaysleep"))
        .args(args)
        .env("RELAYSLEEP_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn run_to(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    bin(&args)
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_reader(csv.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn default_run_writes_24_rows_and_consistent_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(dir.path(), &["--algorithm", "reduced-dp"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("slots.csv")).unwrap();
    assert_eq!(csv.lines().count(), 25);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["algorithm"], "reduced-dp");

    let energy: f64 = column(&csv, "bs_energy_j").iter().sum();
    let cost: f64 = column(&csv, "stage_cost").iter().sum();
    let blocking = column(&csv, "system_blocking");
    let mean_blocking = blocking.iter().sum::<f64>() / blocking.len() as f64;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
    assert!(close(summary["total_grid_energy_j"].as_f64().unwrap(), energy));
    assert!(close(summary["weighted_cost"].as_f64().unwrap(), cost));
    assert!(close(summary["mean_blocking"].as_f64().unwrap(), mean_blocking));
    assert!(close(
        summary["mean_grid_power_w"].as_f64().unwrap(),
        energy / (24.0 * 3600.0)
    ));
}

#[test]
fn fixed_policy_matches_library_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("zeros.csv");
    let header: Vec<String> = (1..=6).map(|n| format!("phi_{n}")).collect();
    let mut text = header.join(",") + "\n";
    for _ in 0..24 {
        text += &["0"; 6].join(",");
        text.push('\n');
    }
    fs::write(&policy, text).unwrap();
    let out = run_to(
        dir.path(),
        &["--algorithm", "fixed-policy", "--policy", policy.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let p = Problem::new(&Scenario::bundled_default()).unwrap();
    let expected = slots_csv(&evaluate_policy(&p, &vec![vec![0.0; 6]; 24]).unwrap(), 6).unwrap();
    assert_eq!(fs::read(dir.path().join("slots.csv")).unwrap(), expected);
}

#[test]
fn output_of_a_run_feeds_back_as_a_fixed_policy() {
    let a = tempfile::tempdir().unwrap();
    assert!(run_to(a.path(), &["--algorithm", "greedy"]).status.success());
    let b = tempfile::tempdir().unwrap();
    let policy = a.path().join("slots.csv");
    let out = run_to(
        b.path(),
        &["--algorithm", "fixed-policy", "--policy", policy.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let first = fs::read_to_string(a.path().join("slots.csv")).unwrap();
    let second = fs::read_to_string(b.path().join("slots.csv")).unwrap();
    assert_eq!(column(&first, "stage_cost"), column(&second, "stage_cost"));
}

#[test]
fn missing_profile_column_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let profiles = dir.path().join("profiles.csv");
    let mut text = String::from("slot,length_s,bs_arrivals");
    for n in 1..=6 {
        text += &format!(",rs_arrivals_{n}");
    }
    for n in 1..=5 {
        text += &format!(",harvest_w_{n}");
    }
    text.push('\n');
    for i in 0..24 {
        text += &format!("{i},3600,10");
        text += &",2".repeat(6);
        text += &",50".repeat(5);
        text.push('\n');
    }
    fs::write(&profiles, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = run_to(&out_dir, &["--profiles", profiles.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 2") && err.contains("columns"), "{err}");
    assert!(!out_dir.exists());
}

#[test]
fn missing_scenario_field_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(relaysleep::scenario::DEFAULT_SCENARIO_JSON).unwrap();
    doc["profiles"].as_object_mut().unwrap().remove("harvest_w");
    let path = dir.path().join("bad.json");
    fs::write(&path, doc.to_string()).unwrap();
    let out = run_to(&dir.path().join("out"), &["--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("harvest_w"), "{}", stderr(&out));
}

#[test]
fn exact_dp_on_six_relays_exceeds_budget_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run_to(&out_dir, &["--algorithm", "exact-dp"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_dir.join("slots.csv").exists());
}

#[test]
fn zero_bs_traffic_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Scenario::bundled_default();
    s.profiles.bs_arrivals[5] = 0.0;
    let path = dir.path().join("s.json");
    fs::write(&path, s.to_json_pretty()).unwrap();
    let out = run_to(&dir.path().join("out"), &["--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_to(a.path(), &["--seed", "7"]).status.success());
    assert!(run_to(b.path(), &["--seed", "7"]).status.success());
    assert_eq!(
        fs::read(a.path().join("slots.csv")).unwrap(),
        fs::read(b.path().join("slots.csv")).unwrap()
    );
}

#[test]
fn default_reduced_dp_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_to(dir.path(), &["--algorithm", "reduced-dp", "--seed", "2026"])
        .status
        .success());
    let got = fs::read(dir.path().join("slots.csv")).unwrap();
    if std::env::var_os("RELAYSLEEP_BLESS").is_some() {
        fs::create_dir_all(PathBuf::from(GOLDEN).parent().unwrap()).unwrap();
        fs::write(GOLDEN, &got).unwrap();
    }
    assert_eq!(got, fs::read(GOLDEN).expect("golden file present"));
}

#[test]
fn psi_sweep_writes_one_run_per_cell_and_a_tradeoff_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&[
        "sweep",
        "--axis",
        "psi",
        "--values",
        "0,1e7,2e7,4e7,8e7",
        "--algorithm",
        "reduced-dp,greedy",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = fs::read_to_string(dir.path().join("tradeoff.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "axis_value,algorithm,mean_grid_power_w,mean_blocking"
    );
    assert_eq!(lines.count(), 10);
    let runs = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().join("slots.csv").exists())
        .count();
    assert_eq!(runs, 10);
}

#[test]
fn sweep_needs_two_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&[
        "sweep",
        "--axis",
        "psi",
        "--values",
        "1e7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_is_deterministic_and_passes() {
    let args = [
        "validate",
        "--slot",
        "19",
        "--replications",
        "4",
        "--samples",
        "20000",
        "--seed",
        "5",
    ];
    let a = bin(&args);
    let b = bin(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let report = String::from_utf8(a.stdout).unwrap();
    assert_eq!(report.lines().count(), 1 + 1 + 6 + 1);
    assert!(report.starts_with("slot,station,analytic,simulated,se,z"));
}

#[test]
fn validate_rejects_out_of_range_slot() {
    let out = bin(&["validate", "--slot", "99"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn default_scenario_prints_bundled_json() {
    let out = bin(&["default-scenario"]);
    assert!(out.status.success());
    let s = Scenario::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(s, Scenario::bundled_default());
}
