use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fleetcharge"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn plan_then_simulate_replays_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    let plan = dir.path().join("plan");
    let sim = dir.path().join("sim");
    ok(&["synth", "instance", "--seed", "1", "--trucks", "3", "--days", "2", "--double-shift-share", "0", "--out", p(&inst)]);
    ok(&["plan", "ds", "--instance", p(&inst), "--gap", "0.001", "--time-limit", "120", "--out", p(&plan)]);
    for f in ["hcv.csv", "installation.csv", "days.txt", "schedule.csv", "initial_soc.csv", "solve.json"] {
        assert!(plan.join(f).exists(), "{f} missing");
    }
    let solve: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(plan.join("solve.json")).unwrap()).unwrap();
    assert_eq!(solve["degraded"], false);
    ok(&[
        "simulate",
        "--instance",
        p(&plan.join("plan_instance")),
        "--installation",
        p(&plan.join("installation.csv")),
        "--schedule",
        p(&plan.join("schedule.csv")),
        "--out",
        p(&sim),
    ]);
    let violations = std::fs::read_to_string(sim.join("violations.csv")).unwrap();
    assert_eq!(violations.lines().count(), 1, "{violations}");
    assert!(sim.join("metrics.csv").exists());
    assert!(sim.join("soc_trajectories.csv").exists());
}

#[test]
fn gps_to_lp() {
    let dir = tempfile::tempdir().unwrap();
    let gps = dir.path().join("gps");
    let bundle = dir.path().join("bundle");
    let moments = dir.path().join("moments.csv");
    let lp = dir.path().join("model.lp");
    ok(&["synth", "gps", "--seed", "2", "--trucks", "3", "--days", "2", "--out", p(&gps)]);
    ok(&[
        "ingest",
        "--gps",
        p(&gps.join("gps.csv")),
        "--temperature",
        p(&gps.join("temperature.csv")),
        "--special",
        "0",
        "--out",
        p(&bundle),
    ]);
    assert!(bundle.join("zone_ranking.csv").exists());
    ok(&["moments", "--instance", p(&bundle), "--out", p(&moments)]);
    assert!(std::fs::read_to_string(&moments).unwrap().lines().count() > 1);
    ok(&["export-lp", "--instance", p(&bundle), "--sigma", "2", "--out", p(&lp)]);
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.to_lowercase().contains("minimize"));
}

#[test]
fn heuristic_needs_a_spread() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    ok(&["synth", "instance", "--trucks", "2", "--days", "1", "--out", p(&inst)]);
    let out = run(&["plan", "ds", "--instance", p(&inst), "--heuristic", "on", "--out", p(&dir.path().join("plan"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sigma"));
}

#[test]
fn bad_pp_is_rejected() {
    let out = run(&["simulate", "--instance", "x", "--installation", "y", "--schedule", "z", "--pp", "upper", "--out", "w"]);
    assert!(!out.status.success());
}
