use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_mcflow");

fn scenario(name: &str) -> String {
    format!("{}/scenarios/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).env("MCFLOW_WORKERS", "2").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn simulate_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("metrics.csv");
    let star = scenario("star.json");
    let (code, stdout) = run(&[
        "simulate", "--scenario", &star, "--policy", "gdcnc", "--V", "10", "--eta", "0", "--slots", "2000",
        "--seed", "3", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("verdict="));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("# mcflow-csv v1 series\nslot,total_backlog,weighted_backlog,cost\n"));
    assert_eq!(text.lines().count(), 2 + 20);
}

#[test]
fn sweep_and_analyze_succeed() {
    let star = scenario("star.json");
    let (code, stdout) = run(&["sweep", "--scenario", &star, "--axis", "V", "--values", "0,5", "--reps", "2", "--slots", "1000"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 2 + 4);
    let (code, stdout) = run(&["analyze", "--scenario", &star, "--load", "1", "--backend", "exact"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("multicast_boundary,,2\n"));
    assert!(stdout.contains("min_cost,1,1.5\n"));
}

#[test]
fn infeasible_load_exits_2() {
    let (code, stdout) = run(&["analyze", "--scenario", &scenario("star.json"), "--load", "3"]);
    assert_eq!(code, 2);
    assert!(stdout.contains("min_cost,3,infeasible"));
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "x", "nodes": [], "bogus": 1}"#).unwrap();
    let (code, _) = run(&["simulate", "--scenario", bad.to_str().unwrap(), "--slots", "10"]);
    assert_eq!(code, 2);
    let (code, _) = run(&["simulate", "--scenario", &scenario("missing.json")]);
    assert_eq!(code, 2);
    let (code, _) = run(&["simulate", "--scenario", &scenario("star.json"), "--load", "-1"]);
    assert_eq!(code, 2);
    let (code, _) = run(&["simulate", "--scenario", &scenario("star.json"), "--V", "-3", "--slots", "100"]);
    assert_eq!(code, 2);
}
