use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn zndisc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zndisc"))
        .args(args)
        .env_remove("ZNDISC_SEED")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(zndisc(&["--help"]).status.code(), Some(0));
    assert_eq!(zndisc(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(zndisc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(zndisc(&["bounds"]).status.code(), Some(1));
    assert_eq!(zndisc(&["bounds", "--n", "4", "--range", "1..3"]).status.code(), Some(1));
    assert_eq!(zndisc(&["construct", "--n", "0"]).status.code(), Some(1));
    assert_eq!(zndisc(&["construct", "--n", "9", "--kappa", "0.5"]).status.code(), Some(1));
}

#[test]
fn exact_small_values() {
    let out = zndisc(&["exact", "--n", "5", "--format", "text"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "3\n");
    let out = zndisc(&["exact", "--n", "8", "--method", "exhaustive"]);
    let doc = json_of(&out);
    assert_eq!(doc["results"][0]["value"], 2);
    assert_eq!(doc["meta"]["command"], "exact");
    assert_eq!(doc["inputs"]["method"], "exhaustive");
}

#[test]
fn exact_over_limit_exits_four() {
    let out = zndisc(&["exact", "--n", "30"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(out.stdout.is_empty());
    assert_eq!(zndisc(&["herdisc", "--n", "13"]).status.code(), Some(4));
}

#[test]
fn herdisc_eight() {
    let doc = json_of(&zndisc(&["herdisc", "--n", "8"]));
    assert_eq!(doc["results"][0]["value"], 3);
}

#[test]
fn construct_then_measure_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let built = dir.path().join("c.json");
    let out = zndisc(&["construct", "--n", "60", "--seed", "3", "--out", path_str(&built)]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&built).unwrap()).unwrap();
    let t = doc["results"][0]["measurement"]["t"].clone();
    assert_eq!(doc["meta"]["config"]["seed"], 3);
    assert!(doc["results"][0]["report"]["base_congruence_max"].as_u64().unwrap() <= 1);

    let measured = json_of(&zndisc(&["measure", "--input", path_str(&built)]));
    assert_eq!(measured["results"][0]["t"], t);

    let bare = dir.path().join("bare.json");
    std::fs::write(&bare, doc["results"][0]["coloring"].to_string()).unwrap();
    let measured = json_of(&zndisc(&["measure", "--input", path_str(&bare)]));
    assert_eq!(measured["results"][0]["t"], t);
}

#[test]
fn measure_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.json");
    std::fs::write(&p, "[1, 0, -1]").unwrap();
    assert_eq!(zndisc(&["measure", "--input", path_str(&p)]).status.code(), Some(1));
    std::fs::write(&p, "[1, 2]").unwrap();
    assert_eq!(zndisc(&["measure", "--input", path_str(&p)]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(zndisc(&["measure", "--input", path_str(&missing)]).status.code(), Some(1));
}

#[test]
fn seed_falls_back_to_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_zndisc"))
        .args(["construct", "--n", "12"])
        .env("ZNDISC_SEED", "41")
        .output()
        .unwrap();
    assert_eq!(json_of(&out)["meta"]["config"]["seed"], 41);
    let out = Command::new(env!("CARGO_BIN_EXE_zndisc"))
        .args(["construct", "--n", "12", "--seed", "2"])
        .env("ZNDISC_SEED", "41")
        .output()
        .unwrap();
    assert_eq!(json_of(&out)["meta"]["config"]["seed"], 2);
}

#[test]
fn empty_range_is_not_an_error() {
    let out = zndisc(&["bounds", "--range", "9..3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["results"].as_array().unwrap().len(), 0);
}

#[test]
fn bounds_range_is_inclusive() {
    let doc = json_of(&zndisc(&["bounds", "--range", "10..12"]));
    let ns: Vec<u64> = doc["results"].as_array().unwrap().iter().map(|r| r["n"].as_u64().unwrap()).collect();
    assert_eq!(ns, vec![10, 11, 12]);
}

#[test]
fn sweep_csv_ends_with_slope() {
    let out = zndisc(&["sweep", "--range", "50..80", "--primes-only", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.starts_with("# zndisc "));
    assert!(s.lines().nth(1).unwrap().starts_with("n,r_star,"));
    let last = s.lines().last().unwrap();
    let slope: f64 = last.strip_prefix("# slope=").unwrap().parse().unwrap();
    assert!(slope.is_finite());
    // 53 59 61 67 71 73 79
    assert_eq!(s.lines().count(), 2 + 7 + 1);
}

#[test]
fn fourier_check_passes() {
    let out = zndisc(&["fourier-check", "--n", "12", "--trials", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_of(&out);
    for c in doc["results"].as_array().unwrap() {
        assert_eq!(c["passed"], c["evaluated"]);
    }
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for (k, args) in [
        vec!["construct", "--n", "90", "--seed", "5"],
        vec!["sweep", "--range", "20..40", "--format", "csv"],
        vec!["fourier-check", "--n", "8", "--trials", "4", "--seed", "9"],
        vec!["exact", "--n", "10", "--workers", "3", "--method", "exhaustive"],
    ]
    .into_iter()
    .enumerate()
    {
        let a = dir.path().join(format!("{k}a"));
        let b = dir.path().join(format!("{k}b"));
        for p in [&a, &b] {
            let mut full = args.clone();
            full.extend(["--out", path_str(p)]);
            assert_eq!(zndisc(&full).status.code(), Some(0), "{args:?}");
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{args:?}");
    }
}
