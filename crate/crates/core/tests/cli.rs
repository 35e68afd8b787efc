//! The `dsgd` binary end to end: exit codes, determinism, worker-count
//! independence and the mixed-hash refusal.

use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
kind = "critical-point"
seeds = [4, 2, 3, 1]
steps = 3000

[problem]
loss = "quadratic"
agents = 3
targets = [[1.0, 0.0], [0.0, 1.0], [-1.0, 2.0]]

[schedule]
alpha_scale = 0.5
tau_alpha = 1.0
gamma_scale = 1.0
tau_gamma = 0.6

[noise]
kind = "gaussian"
sigma = 0.1
"#;

fn dsgd(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dsgd"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("DSGD_WORKERS", w),
        None => cmd.env_remove("DSGD_WORKERS"),
    };
    cmd.output().expect("spawn dsgd")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_to(cfg: &str, out: &Path, workers: Option<&str>) -> String {
    let o = dsgd(&["run", cfg, "--out", out.to_str().unwrap()], workers);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read_to_string(out.join("records.tsv")).unwrap()
}

#[test]
fn validate_echoes_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", CONFIG);
    let o = dsgd(&["validate", &cfg], None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("# config ok, hash "));
    // defaults are filled in
    assert!(text.contains("ceiling = 1000.0"), "{text}");
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write(dir.path(), "m.toml", &CONFIG.replace("loss = \"quadratic\"\n", ""));
    let o = dsgd(&["validate", &missing], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("loss"));

    let bad = write(dir.path(), "b.toml", &CONFIG.replace("tau_gamma = 0.6", "tau_gamma = 0.3"));
    assert_eq!(dsgd(&["run", &bad], None).status.code(), Some(1));
    assert_eq!(dsgd(&["validate", "/nonexistent/x.toml"], None).status.code(), Some(1));
    assert_eq!(dsgd(&["frobnicate"], None).status.code(), Some(1));
}

#[test]
fn experiment_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // the run itself succeeds, but the output path is a file
    let cfg = write(dir.path(), "a.toml", &CONFIG.replace("steps = 3000", "steps = 10"));
    let blocker = write(dir.path(), "blocker", "");
    let o = dsgd(&["run", &cfg, "--out", &format!("{blocker}/sub")], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runs_are_deterministic_and_sorted_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", CONFIG);
    let a = run_to(&cfg, &dir.path().join("a"), Some("1"));
    let b = run_to(&cfg, &dir.path().join("b"), Some("3"));
    assert_eq!(a, b);
    let seeds: Vec<u64> = a
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("seed"))
        .map(|l| l.split('\t').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(seeds, vec![1, 2, 3, 4]);
}

#[test]
fn report_checks_summaries_and_refuses_mixed_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", CONFIG);
    let other = write(dir.path(), "b.toml", &CONFIG.replace("steps = 3000", "steps = 2000"));
    let results = dir.path().join("results");
    run_to(&cfg, &results.join("one"), None);
    run_to(&cfg, &results.join("two"), None);

    let o = dsgd(&["report", results.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    // a tampered summary is an experiment failure
    let summary = results.join("two/summary.txt");
    let text = std::fs::read_to_string(&summary).unwrap();
    let tampered: String = text
        .lines()
        .map(|l| if l.starts_with("max_distance") { "max_distance = 123".to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&summary, tampered + "\n").unwrap();
    assert_eq!(dsgd(&["report", results.to_str().unwrap()], None).status.code(), Some(2));
    std::fs::write(&summary, text).unwrap();

    run_to(&other, &results.join("three"), None);
    let o = dsgd(&["report", results.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mix"));
}
