use std::path::Path;
use std::process::{Command, Output};

fn occtrack() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_occtrack"));
    cmd.env_remove("OCCTRACK_OUT");
    cmd
}

fn run_args(out: Option<&Path>) -> Vec<String> {
    let mut args: Vec<String> = [
        "run",
        "--scenario",
        "trajectory_handover",
        "--alg",
        "sma",
        "--horizon",
        "2",
        "--occlusion",
        "apriori",
        "--trials",
        "2",
        "--seed",
        "9",
        "--pso-swarm",
        "4",
        "--pso-iterations",
        "3",
    ]
    .map(String::from)
    .into();
    if let Some(out) = out {
        args.push("--out".into());
        args.push(out.display().to_string());
    }
    args
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("batch");
    let o = occtrack().args(run_args(Some(&out))).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("2 trials completed"));
    for f in ["run.json", "trial_0000.json", "trial_0001.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }

    let analyze = |emit: &str, format: &str| {
        let o = occtrack()
            .args(["analyze", "--traces", out.to_str().unwrap(), "--emit", emit, "--format", format])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    let sankey = analyze("sankey", "csv");
    assert!(sankey.starts_with("source,target,value\n"));
    let mass: usize = sankey
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("c0:"))
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(mass, 2);
    assert!(analyze("coverage", "csv").starts_with("target,k,time,mean_coverage,occluded_fraction\n"));
    assert!(analyze("coverage", "json").trim_start().starts_with('{'));
    assert!(analyze("events", "csv").starts_with("trial,seed,kind,"));
    assert!(analyze("events", "json").trim_start().starts_with('['));

    let file = dir.path().join("flow.csv");
    let o = occtrack()
        .args(["analyze", "--traces", out.to_str().unwrap(), "--emit", "sankey", "--output", file.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(file).unwrap(), sankey);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(occtrack().args(run_args(Some(&a))).output().unwrap().status.success());
    assert!(occtrack().args(run_args(Some(&b))).output().unwrap().status.success());
    for f in ["run.json", "trial_0000.json", "trial_0001.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_env");
    let o = occtrack().args(run_args(None)).env("OCCTRACK_OUT", &out).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("run.json").is_file());
}

#[test]
fn missing_output_directory_is_an_error() {
    let o = occtrack().args(run_args(None)).output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn malformed_scenario_fails_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = include_str!("../../core/scenarios/joint_effect.json").replacen("\"dt\": 0.2", "\"dt\": \"slow\"", 1);
    std::fs::write(&path, text).unwrap();
    let mut args = run_args(Some(&dir.path().join("out")));
    args[2] = path.display().to_string();
    let o = occtrack().args(&args).output().unwrap();
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("dt"), "{err}");
}

#[test]
fn unknown_scenario_and_bad_values_fail() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = run_args(Some(dir.path()));
    args[2] = "no_such_scenario".into();
    let o = occtrack().args(&args).output().unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no_such_scenario"));

    let mut args = run_args(Some(dir.path()));
    args[6] = "0".into();
    assert!(!occtrack().args(&args).output().unwrap().status.success());

    let mut args = run_args(Some(dir.path()));
    args[4] = "pma".into();
    assert!(!occtrack().args(&args).output().unwrap().status.success());
}

#[test]
fn analyze_without_traces_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = occtrack()
        .args(["analyze", "--traces", dir.path().to_str().unwrap(), "--emit", "coverage"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("run.json"));
}
