use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossdiff"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn analyze_weak_competition_reports_case_a() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let cfg = config("weak_competition.json");
    let out = run(&["analyze", "--config", cfg.to_str().unwrap(), "--output", report.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("nontrivial positive solution exists (case a)"));
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("\"schema_version\": 1"));
    assert!(!text.contains("timings"));
}

#[test]
fn reports_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("weak_competition.json");
    let mut texts = Vec::new();
    for k in 0..2 {
        let report = dir.path().join(format!("r{k}.json"));
        let out = run(&[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--grid",
            "32",
            "--seed-random",
            "7",
            "--output",
            report.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        texts.push((fs::read(&report).unwrap(), fs::read(report.with_extension("csv")).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn mode_seed_finds_a_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("pattern.json");
    let cfg = config("pattern_long.json");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--seed-mode",
        "2",
        "--amp",
        "0.1",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("Nonconstant"), "{}", stdout(&out));
    let csv = fs::read_to_string(report.with_extension("csv")).unwrap();
    assert!(csv.starts_with("x,u_1,u_2\n"));
    assert_eq!(csv.lines().count(), 65);
}

#[test]
fn constant_seed_on_logistic_pair_stays_constant() {
    let cfg = config("logistic_pair.json");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--seed-constant", "1,1", "--no-homotopy"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("NontrivialConstant"));
}

#[test]
fn coarse_grid_is_an_input_error() {
    let cfg = config("logistic_pair.json");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--grid", "4"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("grid too coarse"));
}

#[test]
fn malformed_config_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"m\": 2, \"d\": [1.0]").unwrap();
    let out = run(&["analyze", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("invalid configuration"));
    let out = run(&["analyze", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn singular_interactions_are_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("singular.json");
    let cfg = config("singular.json");
    let out = run(&["analyze", "--config", cfg.to_str().unwrap(), "--output", report.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("degenerate-subset"));
    assert!(fs::read_to_string(&report).unwrap().contains("degenerate-subset"));
}

#[test]
fn bad_flags_are_input_errors() {
    let cfg = config("logistic_pair.json");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--seed-random", "1", "--seed-constant", "1,1"]);
    assert_eq!(code(&out), 1);
    let out = run(&["analyze", "--config", cfg.to_str().unwrap(), "--bogus"]);
    assert_eq!(code(&out), 1);
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--seed-constant", "1,x"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn sweep_is_ordered_and_thread_independent() {
    let cfg = config("pattern.json");
    let args = ["sweep", "--config", cfg.to_str().unwrap(), "--param", "d.0=0.05:0.3:6"];
    let one = Command::new(env!("CARGO_BIN_EXE_crossdiff"))
        .args(args)
        .env("CROSSDIFF_THREADS", "1")
        .output()
        .unwrap();
    let two = Command::new(env!("CARGO_BIN_EXE_crossdiff"))
        .args(args)
        .env("CROSSDIFF_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&one), 0, "{}", stderr(&one));
    assert_eq!(one.stdout, two.stdout);
    let text = stdout(&one);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("d.0,5e-2,conclusive,0,-1,true"), "{}", lines[1]);
    assert!(lines[6].starts_with("d.0,3e-1,conclusive,0,1,false"), "{}", lines[6]);
}

#[test]
fn invalid_thread_count_is_rejected() {
    let cfg = config("logistic_pair.json");
    let out = Command::new(env!("CARGO_BIN_EXE_crossdiff"))
        .args(["analyze", "--config", cfg.to_str().unwrap()])
        .env("CROSSDIFF_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}
