use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ncw"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("JSON report")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dist_reproduces_the_asymmetric_value() {
    let o = run(&["dist", path(&scenario("unitary_m2.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let expected = 2.0 + 0.4 - 0.25 - 2.0 * (0.25f64 / 0.4).sqrt();
    assert!((v["optimal_cost"].as_f64().unwrap() - expected).abs() < 1e-5);
    assert_eq!(v["converged"], true);
    assert!(v["constraints"].as_array().unwrap().iter().any(|g| g["group"] == "balance[rotation@1]"));
}

#[test]
fn variant_flag_switches_to_the_modular_distance() {
    let o = run(&["dist", path(&scenario("unitary_m2.json")), "--variant", "modular"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!((v["optimal_cost"].as_f64().unwrap() - 2.15).abs() < 1e-5);
    assert_eq!(v["variant"], "modular");
}

#[test]
fn malformed_density_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("unitary_m2.json"))
        .unwrap()
        .replace(r#"{"qubit_diag": "$p"}"#, r#"{"density": [[0.5, 0], [0, 0.6]]}"#);
    let file = dir.path().join("bad.json");
    std::fs::write(&file, text).unwrap();
    let o = run(&["dist", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("$.systems.A.state.density"), "{err}");
}

#[test]
fn missing_file_is_a_validation_failure() {
    let o = run(&["dist", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let o = run(&["dist", path(&scenario("unitary_m2.json")), "--max-iter", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["converged"], false);
}

#[test]
fn q_sweep_shows_the_jump() {
    let o = run(&["sweep", path(&scenario("modular_jump_q.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header = rows.headers().unwrap().clone();
    let q_col = header.iter().position(|h| h == "q").unwrap();
    let cost_col = header.iter().position(|h| h == "optimal_cost").unwrap();
    let mut seen = 0;
    for rec in rows.records() {
        let rec = rec.unwrap();
        let q: f64 = rec[q_col].parse().unwrap();
        let cost: f64 = rec[cost_col].parse().unwrap();
        let expected = if q == 0.25 { 0.0 } else { 2.0 + q - 0.25 };
        assert!((cost - expected).abs() < 1e-5, "q={q}: {cost}");
        seen += 1;
    }
    assert_eq!(seen, 16);
}

#[test]
fn lambda_sweep_shows_the_plateau() {
    let o = run(&["sweep", path(&scenario("reduced_lambda.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    for rec in rows.records() {
        let rec = rec.unwrap();
        let (l1, l2): (f64, f64) = (rec[1].parse().unwrap(), rec[2].parse().unwrap());
        let cost: f64 = rec[4].parse().unwrap();
        let expected = if l1 == 0.0 && l2 == 0.0 { 2.15 - 2.0 * (0.25f64 / 0.4).sqrt() } else { 2.15 };
        assert!((cost - expected).abs() < 1e-5, "({l1},{l2}): {cost}");
    }
}

#[test]
fn sweep_output_is_deterministic_across_job_counts() {
    let file = scenario("modular_jump_q.json");
    let a = run(&["sweep", path(&file), "--jobs", "1"]);
    let b = run(&["sweep", path(&file), "--jobs", "3"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn empty_range_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("modular_jump_q.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["sweep"] = serde_json::json!([{"param": "q", "start": 0.3, "stop": 0.4, "num": 0}]);
    let file = dir.path().join("empty.json");
    std::fs::write(&file, doc.to_string()).unwrap();
    let out = dir.path().join("out.csv");
    let o = run(&["sweep", file.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("scenario,q,variant,optimal_cost,distance"));
}

#[test]
fn reduce_compares_reduced_and_augmented_distances() {
    let o = run(&["reduce", path(&scenario("reduce_two_qubit.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["inequality_holds"], true);
    assert!(v["slack"].as_f64().unwrap() > -1e-6);
}

#[test]
fn verify_runs_named_suites() {
    let o = run(&["verify", "torus-moments", "balance-pattern"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);
}

#[test]
fn verify_reads_suite_files() {
    let o = run(&["verify", path(&scenario("verify_core.json")), "--cases", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 7);
}

#[test]
fn verify_rejects_unknown_suites() {
    let o = run(&["verify", "no-such-suite"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_bundled_scenario_validates() {
    for entry in std::fs::read_dir(scenario("")).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        if name.starts_with("verify") {
            continue;
        }
        let cmd = if name.starts_with("reduce_") { "reduce" } else if name.contains("jump") || name.contains("lambda") { "sweep" } else { "dist" };
        let o = run(&[cmd, p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
