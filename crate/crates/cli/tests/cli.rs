use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lrfermion"));
    cmd.args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("LRFERMION_OUT");
    if let Some(text) = config {
        let path = dir.join("job.toml");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

fn header(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(file))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_lr_writes_fixed_schema() {
    let dir = TempDir::new().unwrap();
    let cfg = "[model]\ndimension = 1\nside = 60\nboundary = \"open\"\nalpha = 2.5\nJ = 1.0\n";
    let out = run(&["verify-lr", "--seed", "11"], Some(cfg), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(
        header(dir.path(), "verify_lr.csv"),
        "t,distance,measured_norm,envelope,ratio"
    );
    let r = report(dir.path());
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["seed"], 11);
    assert_eq!(r["tolerances"]["ratio_slack"], 1e-12);
    assert_eq!(r["pass"], true);
    assert!(r["metrics"]["worst_ratio"].as_f64().unwrap() <= 1.0);
    assert!(dir.path().join("out/timing.json").exists());
}

#[test]
fn randomized_verify_lr_over_all_pairs() {
    let dir = TempDir::new().unwrap();
    let cfg = "[job]\nrandomize = true\npairs = \"all\"\ntimes = [0.5, 2.0]\n\
               [model]\ndimension = 2\nside = 5\nboundary = \"periodic\"\nalpha = 3.0\nJ = 1.0\n";
    let out = run(&["verify-lr"], Some(cfg), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(report(dir.path())["metrics"]["samples"], 2.0 * 625.0);
}

#[test]
fn fig2_reproduces_inverse_distance_decay() {
    let dir = TempDir::new().unwrap();
    let out = run(&["fig2"], Some("[job]\ndimension = 1\nside = 500\n"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(header(dir.path(), "fig2.csv"), "lambda,separation,norm");
    let r = report(dir.path());
    for fit in r["details"]["fits"].as_array().unwrap() {
        assert!((fit["slope"].as_f64().unwrap() + 1.0).abs() <= 0.15);
        assert_eq!(fit["L"], 500);
        assert!(fit["slope_ci"].is_array() && fit["residual"].is_number());
    }
}

#[test]
fn bound_state_tail_follows_alpha() {
    let dir = TempDir::new().unwrap();
    let out = run(&["bound-state"], None, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(header(dir.path(), "bound_state.csv"), "site,|psi|");
    let r = report(dir.path());
    assert!((r["metrics"]["slope"].as_f64().unwrap() + 3.0).abs() <= 0.25);
    assert!(r["metrics"]["residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn bound_state_requires_an_impurity() {
    let dir = TempDir::new().unwrap();
    let cfg = "[model]\ndimension = 1\nside = 50\nboundary = \"periodic\"\nalpha = 3\nJ = 1\n";
    let out = run(&["bound-state"], Some(cfg), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("impurities"));
}

#[test]
fn clustering_is_dominated() {
    let dir = TempDir::new().unwrap();
    let out = run(&["clustering"], Some("[job]\nside = 200\n"), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for file in ["clustering_covariance.csv", "clustering_green.csv"] {
        assert_eq!(header(dir.path(), file), "distance,block_norm,envelope,ratio");
    }
}

#[test]
fn gap_scan_and_filter_check_pass() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["gap-scan", "--threads", "2"],
        Some("[job]\ndimension = 2\nside = 12\nlambda_points = 21\n"),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(
        report(dir.path())["metrics"]["min_eigenvalue_squared"]
            .as_f64()
            .unwrap()
            >= 0.5 - 1e-9
    );

    let dir = TempDir::new().unwrap();
    let out = run(
        &["filter-check"],
        Some("[job]\nsamples = 4\ninstances = 2\n"),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn lemma_suite_is_byte_reproducible() {
    let cfg = "[job]\ntrials = 6\n";
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let out = run(&["lemma-suite", "--seed", "7"], Some(cfg), dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for file in ["report.json", "lemma_suite.csv"] {
        let x = std::fs::read(a.path().join("out").join(file)).unwrap();
        let y = std::fs::read(b.path().join("out").join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
    assert_eq!(report(a.path())["seed"], 7);
}

#[test]
fn tight_tolerances_fail_with_the_metric_named() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["fig2", "--tolerance-scale", "0.01"],
        Some("[job]\nside = 200\n"),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path());
    assert_eq!(r["pass"], false);
    assert!(r["reason"].as_str().unwrap().contains("slope[lambda="));
    assert_eq!(r["tolerance_scale"], 0.01);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = run(&["fig2"], Some("[job]\nsied = 10\n"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sied"), "{}", stderr(&out));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let out = run(&["gap-scan"], Some("[job]\ntrials = 3\n"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("trials"));

    let out = run(&["fig2"], Some("[job]\nkind = \"lemma-suite\"\n"), dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["no-such-job"], None, dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = run(
        &["verify-lr"],
        Some("[model]\ndimension = 1\nside = 8\nboundary = \"open\"\nalpha = 0.5\nJ = 1\n"),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn output_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_lrfermion"))
        .args(["gap-scan"])
        .env("LRFERMION_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(target.join("report.json").exists());
}
