use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mec_bandit::experiment::{parse_spec, Overrides};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mec-bandit"))
        .args(args)
        .output()
        .expect("spawn cli")
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

fn header(path: &Path) -> Vec<String> {
    csv::Reader::from_path(path)
        .unwrap()
        .headers()
        .unwrap()
        .iter()
        .map(str::to_string)
        .collect()
}

#[test]
fn single_run_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&[
        "run",
        "--horizon",
        "10",
        "--runs",
        "2",
        "--out",
        out,
        "--policy",
        "ssph",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ts = dir.path().join("timeseries.csv");
    assert_eq!(
        header(&ts),
        [
            "run",
            "t",
            "policy",
            "chosen_arm",
            "reward",
            "best_reward",
            "delay_s",
            "running_regret",
            "running_latency_s"
        ]
    );
    let records = rows(&ts);
    assert_eq!(records.len(), 20);
    for run in ["0", "1"] {
        assert_eq!(records.iter().filter(|r| &r[0] == run).count(), 10);
    }
    assert!(dir.path().join("meta.toml").exists());
    assert_eq!(rows(&dir.path().join("summary.csv")).len(), 1);
}

#[test]
fn compare_summarizes_five_policies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&["compare", "--horizon", "50", "--runs", "2", "--out", out]);
    assert!(o.status.success());
    let summary = rows(&dir.path().join("summary.csv"));
    let names: Vec<&str> = summary.iter().map(|r| r.get(0).unwrap()).collect();
    assert_eq!(names, ["SSPH", "TS", "dTS", "dOTS", "D-UCB"]);
}

#[test]
fn alpha_sweep_has_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&[
        "sweep-alpha",
        "--horizon",
        "30",
        "--runs",
        "2",
        "--out",
        out,
    ]);
    assert!(o.status.success());
    let sweep = dir.path().join("sweep.csv");
    assert!(header(&sweep).contains(&"mean_regret".to_string()));
    assert!(header(&sweep).contains(&"stdev_regret".to_string()));
    let alphas: Vec<String> = rows(&sweep).iter().map(|r| r[0].to_string()).collect();
    assert_eq!(
        alphas,
        ["0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9"]
    );
}

#[test]
fn arm_sweep_covers_policy_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "arm_counts = [1, 3]\npolicies = [\"SSPH\", \"TS\"]\n").unwrap();
    let out = dir.path().join("out");
    let o = cli(&[
        "sweep-arms",
        "--config",
        cfg.to_str().unwrap(),
        "--horizon",
        "40",
        "--runs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cells = rows(&out.join("sweep.csv"));
    assert_eq!(cells.len(), 4);
    for c in cells.iter().filter(|c| &c[1] == "1") {
        assert_eq!(&c[3], "0");
    }
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "alpha = 1.2\n").unwrap();
    let o = cli(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));

    fs::write(&bad, "nonsense_key = 3\n").unwrap();
    let o = cli(&["compare", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonsense_key"));

    fs::write(&bad, "horizon = [\n").unwrap();
    let o = cli(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("syntax"));

    let o = cli(&[
        "validate",
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not found"));
}

#[test]
fn unwritable_output_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = cli(&[
        "run",
        "--horizon",
        "5",
        "--runs",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn validate_output_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["validate", "--arms", "7", "--seed", "11"]);
    assert!(o.status.success());
    let meta = dir.path().join("meta.toml");
    fs::write(&meta, &o.stdout).unwrap();
    let reparsed = parse_spec(Some(&meta), &Overrides::default()).unwrap();
    assert_eq!(reparsed.num_arms(), 7);
    assert_eq!(reparsed.seed, 11);
    let direct = parse_spec(
        None,
        &Overrides {
            arms: Some(7),
            seed: Some(11),
            ..Overrides::default()
        },
    )
    .unwrap();
    assert_eq!(reparsed, direct);
}

#[test]
fn written_meta_reparses_to_same_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = cli(&[
        "run",
        "--horizon",
        "5",
        "--runs",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let meta = out.join("meta.toml");
    let text = fs::read_to_string(&meta).unwrap();
    assert!(text.contains("latency cap"));
    let spec = parse_spec(Some(&meta), &Overrides::default()).unwrap();
    assert_eq!(spec.horizon, 5);
    assert_eq!(spec.out, out);
}
