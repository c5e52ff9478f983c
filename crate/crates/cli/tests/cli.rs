use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annealscape"))
        .args(args)
        .env("ANNEALSCAPE_OUT", out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv(path: impl AsRef<Path>) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

const SMALL_TRAIN: &[&str] = &["train", "--per-class", "30", "--hidden", "8,8,8", "--epochs", "2"];

#[test]
fn regimes_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["regimes"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv(dir.path().join("regimes.csv"));
    assert_eq!(rows[0], ["nu", "B", "label", "expected_count"]);
    let b: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(b.windows(2).all(|w| w[1] < w[0]));
    assert!(b[0] > 0.0 && *b.last().unwrap() < 0.0);
    for r in rows[1..].iter().filter(|r| r[2] == "trivial") {
        assert_eq!(r[3].parse::<f64>().unwrap(), 2.0);
    }
    let m = json(dir.path().join("regimes.manifest.json"));
    assert_eq!(m["subcommand"], "regimes");
    assert_eq!(m["outputs"][0], "regimes.csv");
}

#[test]
fn conflicting_grids_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["regimes", "--nu-grid", "1", "--tau-grid", "2"])), 2);
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("r.toml");
    fs::write(&cfg, "n = 50\np = 4\nnu_grid = [0.5, 1]\n").unwrap();
    let o = run(dir.path(), &["regimes", "--config", cfg.to_str().unwrap(), "--n", "60"]);
    assert_eq!(code(&o), 0);
    let m = json(dir.path().join("regimes.manifest.json"));
    assert_eq!(m["config"]["n"], 60);
    assert_eq!(m["config"]["p"], 4);
    assert_eq!(csv(dir.path().join("regimes.csv")).len(), 3);

    fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["regimes", "--config", cfg.to_str().unwrap()])), 2);
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&run(dir.path(), &["regimes", "--config", missing.to_str().unwrap()])), 3);
}

#[test]
fn landscape_labels_and_degenerate_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["landscape", "--regimes", "sideways"]);
    assert_eq!(code(&o), 2);
    let o = run(
        dir.path(),
        &["landscape", "--n", "20", "--trials", "1", "--regimes", "trivial,custom=0.7"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(dir.path().join("landscape_summary.json"));
    assert_eq!(s["degenerate"], true);
    assert_eq!(s["regimes"][1]["label"], "custom");
    assert_eq!(s["regimes"][0]["cluster_count"], 1);
    assert_eq!(csv(dir.path().join("landscape_trials.csv")).len(), 3);
}

#[test]
fn perturb_check_zero_field_and_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["perturb-check", "--n-grid", "10,12,14", "--nu", "0", "--trials", "4"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(dir.path().join("perturb_check.json"));
    for t in r["trials"].as_array().unwrap() {
        if !t["distance"].is_null() {
            assert_eq!(t["distance"].as_f64().unwrap(), 0.0);
        }
    }
    let cfg = dir.path().join("p.toml");
    fs::write(&cfg, "n_grid = []\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["perturb-check", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn train_writes_five_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), SMALL_TRAIN);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv(dir.path().join("train_metrics.csv"));
    assert_eq!(rows[0], ["epoch", "loss", "val_error", "min_abs_grad", "alignment"]);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.len() == 5));
}

#[test]
fn zero_coupling_anneal_matches_baseline() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut base = SMALL_TRAIN.to_vec();
    base.push("--anneal.J=0");
    assert_eq!(code(&run(a.path(), &base)), 0);
    let mut annealed = base.clone();
    annealed.extend(["--perturbation", "anneal"]);
    assert_eq!(code(&run(b.path(), &annealed)), 0);
    assert_eq!(
        fs::read(a.path().join("train_metrics.csv")).unwrap(),
        fs::read(b.path().join("train_metrics.csv")).unwrap()
    );
}

#[test]
fn missing_idx_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["train", "--images", "/no/such/images", "--labels", "/no/such/labels"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/images"));
}

#[test]
fn divergence_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL_TRAIN.to_vec();
    args.extend(["--optimizer", "sgd", "--lr", "1e200"]);
    assert_eq!(code(&run(dir.path(), &args)), 5);
}

#[test]
fn gradcheck_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["gradcheck"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(dir.path().join("gradcheck.json"))["passed"], true);
    assert_eq!(code(&run(dir.path(), &["gradcheck", "--inject-sign-flip"])), 6);
    assert_eq!(json(dir.path().join("gradcheck.json"))["passed"], false);
    assert_eq!(code(&run(dir.path(), &["gradcheck", "--n", "1000"])), 4);
}

#[test]
fn train_replays_from_manifest() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut args = SMALL_TRAIN.to_vec();
    args.extend(["--perturbation", "resampled", "--seed", "5"]);
    assert_eq!(code(&run(a.path(), &args)), 0);
    let manifest = a.path().join("train.manifest.json");
    assert_eq!(code(&run(b.path(), &["train", "--config", manifest.to_str().unwrap()])), 0);
    for f in ["train_metrics.csv", "train_summary.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(code(&run(b.path(), &["regimes", "--config", manifest.to_str().unwrap()])), 2);
}
