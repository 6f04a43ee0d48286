use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_agilesim"));
    c.env("RUST_LOG", "warn");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn micro_run_writes_complete_outputs() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("micro");
    let cfg = configs().join("micro.toml");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["observations.csv", "plans.csv", "deliveries.csv", "metrics.json", "audit.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("RUN_INCOMPLETE").exists());
    let obs = fs::read_to_string(out.join("observations.csv")).unwrap();
    assert!(obs.lines().count() > 1, "micro run should observe something");
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 1);
    assert_eq!(m["files"].as_object().unwrap().len(), 5);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let d = tempfile::tempdir().unwrap();
    let a = d.path().join("a");
    let cfg = configs().join("micro.toml");
    assert!(run(&["run", "--config", s(&cfg), "--out", s(&a), "--seed", "5"]).status.success());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let resolved = d.path().join("resolved.toml");
    fs::write(&resolved, m["resolved_config"].as_str().unwrap()).unwrap();
    let b = d.path().join("b");
    assert!(run(&["run", "--config", s(&resolved), "--out", s(&b)]).status.success());
    for f in ["observations.csv", "plans.csv", "deliveries.csv", "metrics.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn generate_scenario_is_byte_identical_and_referencable() {
    let d = tempfile::tempdir().unwrap();
    let cfg = configs().join("micro.toml");
    let (a, b) = (d.path().join("s1"), d.path().join("s2"));
    assert!(run(&["generate-scenario", "--config", s(&cfg), "--out", s(&a)]).status.success());
    assert!(run(&["generate-scenario", "--config", s(&cfg), "--out", s(&b)]).status.success());
    for f in ["grid.csv", "precip.csv", "flood.csv", "scenario.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let grid = fs::read_to_string(a.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 101);

    let referencing = "schema_version = 1\nseed = {seed}\n[scenario]\nfrom = \"s1\"\n[constellation]\nn_sats = 1\nn_planes = 1\naltitude_km = 710.0\ninclination_deg = 98.5\nphasing = 0\n";
    let good = d.path().join("good.toml");
    fs::write(&good, referencing.replace("{seed}", "1")).unwrap();
    let o = run(&["run", "--config", s(&good), "--out", s(&d.path().join("r1"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bad = d.path().join("bad.toml");
    fs::write(&bad, referencing.replace("{seed}", "2")).unwrap();
    let out = d.path().join("r2");
    let o = run(&["run", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(out.join("RUN_INCOMPLETE").exists());
}

#[test]
fn config_errors_exit_with_code_two() {
    let d = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("micro.toml")).unwrap();
    let bad = d.path().join("bad.toml");
    fs::write(&bad, format!("{text}\n[executive]\nmode = \"sideways\"\n")).unwrap();
    let o = run(&["run", "--config", s(&bad), "--out", s(&d.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("executive.mode"), "{err}");

    fs::write(&bad, format!("{text}\ntypo_key = 1\n")).unwrap();
    let o = run(&["run", "--config", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("typo_key"));

    let o = run(&["run", "--config", s(&d.path().join("missing.toml"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_refuses_single_config_and_mismatched_scenarios() {
    let d = tempfile::tempdir().unwrap();
    let micro = configs().join("micro.toml");
    let o = run(&["compare", "--config", s(&micro), "--out", s(d.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["compare", "--config", s(&micro), s(&configs().join("desk.toml")), "--out", s(d.path())]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn compare_tabulates_runs_on_a_shared_scenario() {
    let d = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("micro.toml")).unwrap();
    let mut paths = Vec::new();
    for (label, horizon) in [("h5", 300), ("h10", 600)] {
        let p = d.path().join(format!("{label}.toml"));
        let t = text.replace("label = \"micro\"", &format!("label = \"{label}\""));
        fs::write(&p, format!("{t}\n[executive]\nplan_horizon_s = {horizon}\nreplan_interval_s = 300\n")).unwrap();
        paths.push(p);
    }
    let out = d.path().join("cmp");
    let o = run(&["compare", "--config", s(&paths[0]), s(&paths[1]), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("h5").join("metrics.json").exists());
    assert!(out.join("comparison_long.csv").exists());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with('*')), "{stdout}");
}

#[test]
fn out_root_env_relocates_default_output() {
    let d = tempfile::tempdir().unwrap();
    let o = bin()
        .env("AGILESIM_OUT_ROOT", d.path())
        .args(["generate-scenario", "--config", s(&configs().join("micro.toml"))])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(d.path().join("micro-scenario").join("scenario.json").exists());
}

#[test]
fn evaluate_writes_error_curve() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("eval");
    let o = run(&["evaluate", "--config", s(&configs().join("micro.toml")), "--out", s(&out)]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("error_curve.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "n_updates,frequency,n_gps,n_samples,error");
    assert_eq!(csv.lines().count(), 29);
}
