use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cadlag-rough"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cadlag-rough-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().arg("--out-dir").arg(dir).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn simulate_lift_solve_metric_pipeline() {
    let dir = scratch("pipeline");
    run(&dir, &["--seed", "3", "simulate", "--preset", "levy", "--n", "64", "--out", "x.csv"]);
    let x = dir.join("x.csv");
    assert!(std::fs::read_to_string(&x).unwrap().starts_with("t,v1,v2,jump"));
    run(&dir, &["lift", "--in", x.to_str().unwrap(), "--out", "lift.csv"]);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("lift.json")).unwrap()).unwrap();
    assert_eq!(meta["d"], 2);
    assert_eq!(meta["marcus_like"], true);
    let lift = dir.join("lift.csv");
    run(&dir, &["solve", "--driver", lift.to_str().unwrap(), "--y0", "1,0.5", "--out", "canonical.csv"]);
    run(&dir, &["solve", "--driver", x.to_str().unwrap(), "--marcus", "--y0", "1,0.5", "--out", "marcus.csv"]);
    let last = |f: &str| -> Vec<f64> {
        let text = std::fs::read_to_string(dir.join(f)).unwrap();
        let line = text.lines().last().unwrap().to_string();
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        cells[1..3].to_vec()
    };
    let (a, b) = (last("canonical.csv"), last("marcus.csv"));
    assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-6), "{a:?} vs {b:?}");
    run(&dir, &["metric", "--metric", "pvar", "--in", lift.to_str().unwrap(), "--out", "pvar.json"]);
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("pvar.json")).unwrap()).unwrap();
    assert!(rep["value"].as_f64().unwrap() > 0.0);
    run(&dir, &["metric", "--metric", "rho", "--in", lift.to_str().unwrap(), lift.to_str().unwrap(), "--out", "rho.json"]);
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("rho.json")).unwrap()).unwrap();
    assert_eq!(rep["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn simulation_is_reproducible_from_the_seed() {
    let dir = scratch("seed");
    for f in ["a.csv", "b.csv"] {
        run(&dir, &["--seed", "9", "simulate", "--preset", "brownian", "--n", "32", "--out", f]);
    }
    run(&dir, &["--seed", "10", "simulate", "--preset", "brownian", "--n", "32", "--out", "c.csv"]);
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn metric_demo_experiment_passes_and_writes_outputs() {
    let dir = scratch("demo");
    let out = run(&dir, &["--threads", "2", "experiment", "--name", "metric_demo"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("PASS ")));
    assert!(!stdout.contains("FAIL "));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["experiment"], "metric_demo");
    assert!(dir.join("samples.csv").exists());
}

#[test]
fn printed_config_runs_unchanged() {
    let dir = scratch("config");
    let out = run(&dir, &["experiment", "--name", "area_vanish", "--samples", "30", "--print-config"]);
    let cfg = dir.join("area.toml");
    std::fs::write(&cfg, out.stdout).unwrap();
    let out = bin().arg("--out-dir").arg(&dir).args(["experiment", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
    assert!(dir.join("report.json").exists());
}

#[test]
fn bad_input_exits_with_an_error() {
    let dir = scratch("bad");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "version = 1\nname = \"wong_zakai\"\nsamples = 10\nunknown = true\n").unwrap();
    let out = bin().arg("--out-dir").arg(&dir).args(["experiment", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    let out = bin().args(["experiment", "--name", "nonexistent"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["lift", "--in", "/nonexistent/path.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
