use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn qfound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfound")).args(args).env("NO_COLOR", "1").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qfound-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Run with `--report` and return the parsed JSON and the raw text.
fn report(name: &str, args: &[&str]) -> (Value, String) {
    let path = scratch(name);
    let mut full = vec!["--report", path.to_str().unwrap(), "--quiet"];
    full.extend_from_slice(args);
    let o = qfound(&full);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    (serde_json::from_str(&text).unwrap(), text)
}

#[test]
fn ks117_is_not_colorable() {
    let o = qfound(&["ks", "color", "--rays", "ks117.rays"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("colorable: false"));
}

#[test]
fn hardy_coincidence_is_one_sixteenth() {
    let o = qfound(&["hardy", "run", "--config", "both"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l.contains("d⁺d⁻") && l.contains("1/16")));
}

#[test]
fn usage_errors_exit_two() {
    for args in [&["bogus"][..], &["ks"], &["--tol", "x", "hardy", "run"], &["hardy", "run", "--config", "sideways"], &["accept", "nope"]] {
        let o = qfound(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
    }
    assert_eq!(qfound(&["ks", "color", "--rays", "/nonexistent/x.rays"]).status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    assert_eq!(qfound(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_data_fails_acceptance() {
    let empty = scratch("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let o = qfound(&["--data", empty.to_str().unwrap(), "accept", "ks"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("criterion 5 ... FAIL"));
}

#[test]
fn accept_suite_runs_only_its_criteria() {
    let o = qfound(&["accept", "hepp"]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("criterion ") && l.contains(" ... ")).map(String::from).collect();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with("criterion 11 ... PASS"));
}

#[test]
fn report_schema_is_stable() {
    let (j, text) = report("hardy.json", &["hardy", "run"]);
    // parsed maps are sorted, so order is read from the text
    let top = ["command", "parameters", "checks", "elapsed_ms", "seed"];
    let mut keys: Vec<&str> = j.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    let mut want = top.to_vec();
    want.sort();
    assert_eq!(keys, want);
    let pos: Vec<usize> = top.iter().map(|k| text.find(&format!("\n  \"{k}\":")).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(j["command"], "hardy run");
    assert_eq!(j["seed"], 42);
    let checks = j["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        let mut keys: Vec<&str> = c.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["expected", "name", "status", "tolerance", "value"]);
        assert!(["pass", "fail", "warn"].contains(&c["status"].as_str().unwrap()));
    }
    let fields: Vec<&str> = text.lines().map(str::trim_start).filter(|l| l.starts_with('"') && !l.starts_with("\"checks\"")).collect();
    for i in (0..fields.len()).filter(|&i| fields[i].starts_with("\"name\":")) {
        let order: Vec<&str> = fields[i..i + 5].iter().map(|l| l.split('"').nth(1).unwrap()).collect();
        assert_eq!(order, ["name", "status", "value", "expected", "tolerance"]);
    }
    assert!(text.lines().all(|l| !l.ends_with(' ')));
    assert!(text.contains("\"1/16\""));
}

#[test]
fn reports_are_deterministic() {
    let strip = |mut j: Value| {
        j.as_object_mut().unwrap().remove("elapsed_ms");
        j
    };
    for (i, args) in [&["fr", "prob", "--trials", "2000"][..], &["way", "ozawa", "--cases", "5"], &["ks", "gleason"]].iter().enumerate() {
        let (a, _) = report(&format!("a{i}.json"), args);
        let (b, _) = report(&format!("b{i}.json"), args);
        assert_eq!(strip(a), strip(b), "{args:?}");
    }
}

#[test]
fn seed_is_recorded() {
    let (j, _) = report("seed.json", &["--seed", "7", "fr", "prob", "--trials", "500"]);
    assert_eq!(j["seed"], 7);
}
