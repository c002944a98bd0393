//! Command-line contract tests: exit codes, artifact layout, manifest
//! contents and stage-to-stage chaining on a miniature configuration.

use std::path::Path;
use std::process::{Command, Output};

fn upkeep(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_upkeep"))
        .args(args)
        .current_dir(dir)
        .env_remove("UPKEEP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        r#"
[fleet]
count = 3
seed = 9
horizon = 40
total_budget = 1500
weibull_scale = [15.0, 35.0]

[training]
steps = 2048
subset = 3
budget_levels = [300, 600]
rollout_horizon = 1024
particles = 32
hidden = 16

[curves]
budget_grid = [0, 300, 600]
runs = 4
n_particles = 32
seed = 3

[forest]
trees = 10

[evaluate]
policies = ["oracle", "guided", "heuristic", "vanilla"]
budget_grid = [0, 300, 600]
runs = 5
particles = 32
allocation_eval_runs = 5
lifetime_samples = 50

[scaling]
counts = [2, 4]
repeats = 1
episodes_per_component = 1
n_particles = 16

[output]
dir = "out"
"#,
    )
    .expect("config written");
    path
}

#[test]
fn pipeline_runs_end_to_end_and_writes_manifests() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny_config(dir.path());
    let out = upkeep(&["pipeline", "--config", "tiny.toml"], dir.path());
    assert!(
        out.status.success(),
        "pipeline failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let outputs = dir.path().join("out");
    for artifact in [
        "fleet.json",
        "guided.ckpt.json",
        "vanilla.ckpt.json",
        "guided-training.csv",
        "curves.csv",
        "forest.json",
        "allocation.csv",
        "metrics.csv",
        "allocation-distributions.csv",
        "timing.csv",
        "scaling-summary.json",
        "pipeline-summary.json",
    ] {
        assert!(outputs.join(artifact).exists(), "missing {artifact}");
    }
    for stage in [
        "gen-fleet",
        "train",
        "fit-curves",
        "train-forest",
        "allocate",
        "evaluate",
        "scaling",
        "pipeline",
    ] {
        let manifest_path = outputs.join(format!("{stage}.manifest.json"));
        assert!(manifest_path.exists(), "missing manifest for {stage}");
        let manifest = upkeep::manifest::RunManifest::load(&manifest_path).unwrap();
        assert_eq!(manifest.command, stage);
        assert!(!manifest.config_hash.is_empty());
    }

    // The metrics table carries the configured policies and budgets.
    let metrics = std::fs::read_to_string(outputs.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with(
        "policy,budget,mean_survival,mean_repairs,mean_cost,runs,std_error"
    ));
    assert_eq!(metrics.lines().count(), 1 + 4 * 3);

    // The allocation respects the configured total budget.
    let allocation = std::fs::read_to_string(outputs.join("allocation.csv")).unwrap();
    let spent: u64 = allocation
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert!(spent <= 1500, "allocation spent {spent}");
}

#[test]
fn rerunning_a_stage_reproduces_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny_config(dir.path());
    let out = upkeep(&["gen-fleet", "--config", "tiny.toml"], dir.path());
    assert!(out.status.success());
    let fleet_path = dir.path().join("out/fleet.json");
    let first = std::fs::read(&fleet_path).unwrap();
    let out = upkeep(&["gen-fleet", "--config", "tiny.toml"], dir.path());
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(&fleet_path).unwrap());
}

#[test]
fn unknown_policy_exits_2_and_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny_config(dir.path());
    assert!(upkeep(&["gen-fleet", "--config", "tiny.toml"], dir.path())
        .status
        .success());
    let out = upkeep(
        &["evaluate", "--config", "tiny.toml", "--policies", "optimal"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("oracle, guided, heuristic, vanilla"), "{stderr}");
}

#[test]
fn missing_inputs_exit_2_with_build_order_hints() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny_config(dir.path());
    // No fleet yet.
    let out = upkeep(&["train", "--config", "tiny.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gen-fleet"));

    // Fleet exists but no checkpoint.
    assert!(upkeep(&["gen-fleet", "--config", "tiny.toml"], dir.path())
        .status
        .success());
    let out = upkeep(&["fit-curves", "--config", "tiny.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train"));

    // No curve table for allocation.
    let out = upkeep(&["allocate", "--config", "tiny.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fit-curves"));
}

#[test]
fn invalid_flag_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = upkeep(&["gen-fleet", "--count", "0", "--out-dir", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = upkeep(
        &["train", "--only", "both", "--out-dir", "out"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("guided, vanilla"));
}

#[test]
fn out_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    write_tiny_config(dir.path());
    let custom = dir.path().join("elsewhere");
    let out = Command::new(env!("CARGO_BIN_EXE_upkeep"))
        .args(["gen-fleet", "--config", "tiny.toml"])
        .current_dir(dir.path())
        .env("UPKEEP_OUT_DIR", &custom)
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    assert!(custom.join("fleet.json").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn allocate_standalone_with_curve_table() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("curves.csv");
    std::fs::write(
        &curves,
        "component_id,alpha,beta,gamma,source\n\
         c1,-7e1,-2e-3,1e2,fitted\n\
         c2,-4e1,-8e-4,1e2,fitted\n",
    )
    .unwrap();
    let out = upkeep(
        &[
            "allocate",
            "--curves",
            "curves.csv",
            "--budget",
            "1000",
            "--out-dir",
            "out",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(dir.path().join("out/allocation.csv")).unwrap();
    let spent: u64 = table
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert!(spent <= 1000);
    assert!(table.lines().nth(1).unwrap().ends_with(",kkt"));
}
