use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nbbm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbbm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn summary(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "summary is one line: {text}");
    serde_json::from_str(&text).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn simulate_at_time_zero_echoes_initial_state() {
    let d = tempfile::tempdir().unwrap();
    let s = summary(&nbbm(d.path(), &["simulate", "--n", "2", "--t", "0", "--seed", "1", "--out", "run"]));
    assert_eq!(s["command"], "simulate");
    assert_eq!(s["n_events"], 0);
    let pos = s["positions"].as_array().unwrap();
    assert_eq!(pos.len(), 2);
    let state = read_json(&d.path().join("run/final_state.json"));
    assert_eq!(&state["positions"], &s["positions"]);
    assert_eq!(state["time"], 0.0);
    let traj = std::fs::read_to_string(d.path().join("run/trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 2);
}

#[test]
fn flags_override_file_and_file_overrides_defaults() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.json"), r#"{"n": 128, "t": 0.5, "seed": 4}"#).unwrap();
    let s = summary(&nbbm(
        d.path(),
        &["simulate", "--config", "c.json", "--n", "256", "--out", "run"],
    ));
    assert_eq!(s["n"], 256);
    let cfg = read_json(&d.path().join("run/resolved-config.json"));
    assert_eq!(cfg["n"], 256);
    assert_eq!(cfg["t"], 0.5);
    assert_eq!(cfg["seed"], 4);
    assert_eq!(cfg["init"], "pimin");
}

#[test]
fn empty_config_gives_defaults() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("empty.json"), "").unwrap();
    summary(&nbbm(d.path(), &["wave", "dump", "--config", "empty.json"]));
    let cfg = read_json(&d.path().join("out/resolved-config.json"));
    assert_eq!(cfg["c"], std::f64::consts::SQRT_2);
    assert_eq!(cfg["xmax"], 20.0);
    assert_eq!(cfg["dx"], 0.01);
    assert_eq!(cfg["seed"], 0);
    let csv = std::fs::read_to_string(d.path().join("out/wave.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,density,tail"));
    assert_eq!(csv.lines().count(), 2002);
}

#[test]
fn missing_output_directory_is_created() {
    let d = tempfile::tempdir().unwrap();
    summary(&nbbm(d.path(), &["wave", "dump", "--xmax", "1", "--out", "a/b/c"]));
    assert!(d.path().join("a/b/c/wave.csv").is_file());
}

#[test]
fn manifest_checksums_match_files() {
    let d = tempfile::tempdir().unwrap();
    summary(&nbbm(d.path(), &["simulate", "--n", "8", "--t", "1", "--out", "run"]));
    let m = read_json(&d.path().join("run/manifest.json"));
    assert_eq!(m["seed_derivation"], "splitmix64-chain-v1");
    let files = m["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"resolved-config.json"));
    for f in files {
        let bytes = std::fs::read(d.path().join("run").join(f["name"].as_str().unwrap())).unwrap();
        use sha2::Digest;
        let digest = hex::encode(sha2::Sha256::digest(&bytes));
        assert_eq!(f["sha256"].as_str().unwrap(), digest);
    }
}

#[test]
fn bad_input_exits_with_two() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.json"), r#"{"n": 128"#).unwrap();
    std::fs::write(d.path().join("unknown.json"), r#"{"nn": 128}"#).unwrap();
    std::fs::write(d.path().join("array.json"), "[1, 2]").unwrap();
    for args in [
        &["simulate", "--config", "bad.json"][..],
        &["simulate", "--config", "unknown.json"],
        &["simulate", "--config", "array.json"],
        &["simulate", "--config", "missing.json"],
        &["pde", "--dt", "0.1"],
        &["pde", "--scheme", "implicit"],
        &["couple", "--mode", "sideways"],
        &["selection", "--centring", "none"],
        &["nonsense"],
    ] {
        let o = nbbm(d.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = nbbm(d.path(), &["simulate", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn non_finite_boundary_is_a_numerical_failure() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("b.csv"), "t,L\n0,0\n1,NaN\n2,NaN\n").unwrap();
    let o = nbbm(d.path(), &["killedbm", "--boundary", "b.csv", "--t", "1", "--paths", "10"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn identical_config_gives_identical_bytes() {
    let runs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &runs {
        summary(&nbbm(
            d.path(),
            &["selection", "--n", "16,32", "--burn-in", "5", "--horizon", "10", "--seed", "3", "--out", "res"],
        ));
    }
    for name in ["gaps.csv", "resolved-config.json", "manifest.json"] {
        let a = std::fs::read(runs[0].path().join("res").join(name)).unwrap();
        let b = std::fs::read(runs[1].path().join("res").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn selection_gaps_are_positive() {
    let d = tempfile::tempdir().unwrap();
    let s = summary(&nbbm(
        d.path(),
        &["selection", "--n", "64,256,1024", "--seed", "9", "--burn-in", "20", "--horizon", "20"],
    ));
    assert_eq!(s["gaps"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(d.path().join("out/gaps.csv")).unwrap();
    let gaps: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(gaps.len(), 3);
    assert!(gaps.iter().all(|&g| g > 0.0), "{gaps:?}");
}

#[test]
fn pde_boundary_feeds_killed_paths() {
    let d = tempfile::tempdir().unwrap();
    let s = summary(&nbbm(d.path(), &["pde", "--t", "2", "--dx", "0.02", "--dt", "0.002", "--out", "pde"]));
    assert!(s["boundary_over_t"].as_f64().unwrap() < std::f64::consts::SQRT_2);
    let b = std::fs::read_to_string(d.path().join("pde/boundary.csv")).unwrap();
    assert_eq!(b.lines().next(), Some("t,L,L_over_t"));
    let p = std::fs::read_to_string(d.path().join("pde/profile_t.csv")).unwrap();
    assert_eq!(p.lines().next(), Some("t,x,u"));
    let k = summary(&nbbm(
        d.path(),
        &["killedbm", "--boundary", "pde/boundary.csv", "--t", "2", "--paths", "2000", "--out", "k"],
    ));
    assert_eq!(k["paths"], 2000);
    let tau = std::fs::read_to_string(d.path().join("k/tau.csv")).unwrap();
    let surv = std::fs::read_to_string(d.path().join("k/survivors.csv")).unwrap();
    assert_eq!(tau.lines().count() + surv.lines().count() - 2, 2000);
}

#[test]
fn couple_and_velocity_write_their_tables() {
    let d = tempfile::tempdir().unwrap();
    let c = summary(&nbbm(
        d.path(),
        &["couple", "--n", "16", "--replicas", "8", "--t", "1,0.5", "--out", "c"],
    ));
    assert_eq!(c["rows"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(d.path().join("c/contraction.csv")).unwrap();
    assert!(csv.starts_with("t,lhs,rhs,margin"));
    assert!(csv.lines().nth(1).unwrap().starts_with("0.5,"));

    summary(&nbbm(
        d.path(),
        &["velocity", "--n", "2,8", "--burn-in", "5", "--horizon", "20", "--replicas", "2", "--out", "v"],
    ));
    let csv = std::fs::read_to_string(d.path().join("v/velocity.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("N,v_hat,std_error"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn stationary_and_conjecture_outputs() {
    let d = tempfile::tempdir().unwrap();
    summary(&nbbm(
        d.path(),
        &["stationary", "--n", "32", "--burn-in", "5", "--horizon", "10", "--out", "s"],
    ));
    for f in ["ensemble.json", "mean_profile.csv", "gaps.csv", "manifest.json"] {
        assert!(d.path().join("s").join(f).is_file(), "{f}");
    }
    let e = read_json(&d.path().join("s/ensemble.json"));
    assert_eq!(e["snapshots"].as_array().unwrap().len(), 10);

    let s = summary(&nbbm(d.path(), &["conjecture", "--t", "2", "--dx", "0.02", "--dt", "0.002", "--out", "cj"]));
    assert!(s["final_speed"].as_f64().unwrap() > 0.0);
}

#[test]
fn quick_verify_passes() {
    let d = tempfile::tempdir().unwrap();
    let s = summary(&nbbm(d.path(), &["verify", "--suite", "quick"]));
    assert_eq!(s["checks"], s["passed"]);
    let o = nbbm(d.path(), &["verify", "--suite", "slow"]);
    assert_eq!(o.status.code(), Some(2));
}
