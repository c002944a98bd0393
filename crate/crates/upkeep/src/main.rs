//! Thin command-line front end over the `upkeep` library: each subcommand
//! runs one pipeline stage, writes its artifacts plus a run manifest into
//! the output directory, and `pipeline` chains them all.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage/configuration error.
//! The output directory resolves as `--out-dir` flag, then the
//! `UPKEEP_OUT_DIR` environment variable, then the config file, then `out`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use upkeep::agent::{
    load_checkpoint, save_checkpoint, train_meta_ppo, CheckpointMeta, PolicyParameters,
};
use upkeep::alloc::{
    allocate_bruteforce, allocate_kkt, allocate_proportional, write_allocation_csv,
};
use upkeep::bench::{
    self, run_allocation_comparison, run_policy_sweep, run_scaling_study, write_distribution_csv,
    write_metrics_csv, write_timing_csv, AllocCompareConfig, BenchError, CurveFitPolicy,
    ExperimentConfig, PolicyKind, PolicyRoster, SweepOptions,
};
use upkeep::manifest::{config_hash, RunManifest};
use upkeep::model::{expected_unrepaired_lifetime, Fleet};
use upkeep::survival::{
    forest::ForestModel, read_curve_csv, write_curve_csv, CurveSource, SurvivalCurve,
};

#[derive(Parser)]
#[command(
    name = "upkeep",
    version,
    about = "Budget-constrained maintenance planning: fleet generation, agent training, survival-curve fitting, budget allocation, policy evaluation and scaling studies."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Experiment configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides UPKEEP_OUT_DIR and the config file).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic fleet file.
    GenFleet {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of components (overrides the config value).
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Total shared budget (defaults to 500 units per component).
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        horizon: Option<u32>,
    },
    /// Meta-train the inspection agents on the fleet.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Environment steps (overrides the config value).
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Train only this agent (`guided` or `vanilla`); default is both.
        #[arg(long)]
        only: Option<String>,
    },
    /// Fit per-component survival curves under the trained guided agent.
    FitCurves {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the random-forest regressor on fitted curves.
    TrainForest {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Split a budget over a curve table.
    Allocate {
        #[command(flatten)]
        common: CommonArgs,
        /// Curve table CSV (defaults to <out>/curves.csv).
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        budget: Option<u64>,
        /// kkt, bruteforce or proportional.
        #[arg(long)]
        method: Option<String>,
    },
    /// Paired-seed policy comparison across budget levels.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated policy list (oracle, guided, heuristic, vanilla).
        #[arg(long, value_delimiter = ',')]
        policies: Vec<String>,
    },
    /// Per-stage wall-clock scaling study over fleet sizes.
    Scaling {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run every stage in order with one shared configuration.
    Pipeline {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Failures split by exit code.
enum CliError {
    /// Bad flags, unreadable/invalid config, missing inputs: exit 2.
    Usage(String),
    /// The stage itself failed: exit 1.
    Runtime(String),
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::InvalidConfig(_) | BenchError::MissingArtifact { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Loads the config (if any) and resolves the output directory.
fn setup(common: &CommonArgs) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let out_dir = common
        .out_dir
        .clone()
        .or_else(|| std::env::var_os("UPKEEP_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| config.output.dir.clone());
    std::fs::create_dir_all(&out_dir).map_err(runtime)?;
    Ok((config, out_dir))
}

fn fleet_path(config: &ExperimentConfig, out_dir: &Path) -> PathBuf {
    config
        .fleet
        .path
        .clone()
        .unwrap_or_else(|| out_dir.join("fleet.json"))
}

fn load_fleet(config: &ExperimentConfig, out_dir: &Path) -> Result<Fleet, CliError> {
    let path = fleet_path(config, out_dir);
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "fleet file {} not found; run `upkeep gen-fleet` first",
            path.display()
        )));
    }
    Fleet::load_json(&path).map_err(usage)
}

fn checkpoint_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(format!("{name}.ckpt.json"))
}

fn load_params(out_dir: &Path, name: &str) -> Result<PolicyParameters, CliError> {
    let path = checkpoint_path(out_dir, name);
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "checkpoint {} not found; run `upkeep train` first",
            path.display()
        )));
    }
    load_checkpoint(&path).map(|(p, _, _)| p).map_err(usage)
}

fn oracle_cache_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("oracle-cache")
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenFleet {
            common,
            count,
            seed,
            budget,
            horizon,
        } => {
            let (mut config, out_dir) = setup(&common)?;
            if let Some(count) = count {
                config.fleet.count = count;
            }
            if let Some(seed) = seed {
                config.fleet.seed = seed;
            }
            if let Some(budget) = budget {
                config.fleet.total_budget = Some(budget);
            }
            if let Some(horizon) = horizon {
                config.fleet.horizon = horizon;
            }
            cmd_gen_fleet(&config, &out_dir)
        }
        Command::Train {
            common,
            steps,
            seed,
            only,
        } => {
            let (mut config, out_dir) = setup(&common)?;
            if let Some(steps) = steps {
                config.training.steps = steps;
            }
            if let Some(seed) = seed {
                config.training.seed = seed;
            }
            cmd_train(&config, &out_dir, only.as_deref())
        }
        Command::FitCurves { common } => {
            let (config, out_dir) = setup(&common)?;
            cmd_fit_curves(&config, &out_dir)
        }
        Command::TrainForest { common } => {
            let (config, out_dir) = setup(&common)?;
            cmd_train_forest(&config, &out_dir)
        }
        Command::Allocate {
            common,
            curves,
            budget,
            method,
        } => {
            let (config, out_dir) = setup(&common)?;
            cmd_allocate(&config, &out_dir, curves, budget, method.as_deref())
        }
        Command::Evaluate { common, policies } => {
            let (mut config, out_dir) = setup(&common)?;
            if !policies.is_empty() {
                config.evaluate.policies = policies;
            }
            cmd_evaluate(&config, &out_dir)
        }
        Command::Scaling { common } => {
            let (config, out_dir) = setup(&common)?;
            cmd_scaling(&config, &out_dir)
        }
        Command::Pipeline { common } => {
            let (config, out_dir) = setup(&common)?;
            cmd_pipeline(&config, &out_dir)
        }
    }
}

fn cmd_gen_fleet(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    // Bad counts or ranges are configuration mistakes, not runtime failures.
    let fleet = config.fleet.generate().map_err(usage)?;
    let path = fleet_path(config, out_dir);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(runtime)?;
    }
    fleet.save_json(&path).map_err(runtime)?;
    let mut manifest = RunManifest::new(
        "gen-fleet",
        config_hash(&config.fleet),
        vec![config.fleet.seed],
    );
    manifest.record_artifact(&path).map_err(runtime)?;
    manifest.write(out_dir, "gen-fleet").map_err(runtime)?;
    println!(
        "wrote {} ({} components, budget {}, horizon {})",
        path.display(),
        fleet.components.len(),
        fleet.total_budget,
        fleet.horizon
    );
    Ok(())
}

fn cmd_train(
    config: &ExperimentConfig,
    out_dir: &Path,
    only: Option<&str>,
) -> Result<(), CliError> {
    let agents: Vec<(&str, bool)> = match only {
        None => vec![("guided", true), ("vanilla", false)],
        Some("guided") => vec![("guided", true)],
        Some("vanilla") => vec![("vanilla", false)],
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown agent {other:?}; valid agents: guided, vanilla"
            )))
        }
    };
    let fleet = load_fleet(config, out_dir)?;
    let pairs = config.training.pairs(&fleet)?;
    let hyper = config.training.hyper();
    let mut manifest = RunManifest::new(
        "train",
        config_hash(&config.training),
        vec![config.training.seed],
    );
    for (name, guided) in agents {
        let (params, log) = train_meta_ppo(
            &pairs,
            fleet.horizon,
            config.training.steps,
            &hyper,
            guided,
            config.training.seed,
        )
        .map_err(runtime)?;
        let ckpt = checkpoint_path(out_dir, name);
        save_checkpoint(
            &ckpt,
            &params,
            &hyper,
            &CheckpointMeta {
                seed: config.training.seed,
                total_steps: config.training.steps,
                guided,
            },
        )
        .map_err(runtime)?;
        let curve = out_dir.join(format!("{name}-training.csv"));
        log.write_csv(&curve).map_err(runtime)?;
        manifest.record_artifact(&ckpt).map_err(runtime)?;
        manifest.record_artifact(&curve).map_err(runtime)?;
        let last = log.rows.last();
        println!(
            "trained {name} agent: {} steps, final mean survival {:.1}",
            config.training.steps,
            last.map_or(f64::NAN, |r| r.mean_survival)
        );
    }
    manifest.write(out_dir, "train").map_err(runtime)?;
    Ok(())
}

fn cmd_fit_curves(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let fleet = load_fleet(config, out_dir)?;
    let guided = load_params(out_dir, "guided")?;
    let cache = oracle_cache_dir(out_dir);
    let curves = bench::fit_fleet_curves(
        &fleet,
        &config.curves,
        Some(&cache),
        CurveFitPolicy::Guided(&guided),
    )?;
    let rows: Vec<(SurvivalCurve, CurveSource)> = curves
        .into_iter()
        .map(|c| (c, CurveSource::Fitted))
        .collect();
    let path = out_dir.join("curves.csv");
    write_curve_csv(&path, &rows).map_err(runtime)?;
    let mut manifest = RunManifest::new(
        "fit-curves",
        config_hash(&config.curves),
        vec![config.curves.seed],
    );
    manifest.record_artifact(&path).map_err(runtime)?;
    manifest.write(out_dir, "fit-curves").map_err(runtime)?;
    println!("wrote {} ({} curves)", path.display(), rows.len());
    Ok(())
}

fn cmd_train_forest(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let fleet = load_fleet(config, out_dir)?;
    let curves_path = out_dir.join("curves.csv");
    if !curves_path.exists() {
        return Err(CliError::Usage(format!(
            "curve table {} not found; run `upkeep fit-curves` first",
            curves_path.display()
        )));
    }
    let curves = read_curve_csv(&curves_path).map_err(usage)?;
    let by_id: std::collections::BTreeMap<&str, f64> = curves
        .iter()
        .filter(|(_, source)| *source == CurveSource::Fitted)
        .map(|(c, _)| (c.component_id.as_str(), c.beta))
        .collect();
    let mut dataset = Vec::new();
    for spec in &fleet.components {
        if let Some(&beta) = by_id.get(spec.id.as_str()) {
            dataset.push((upkeep::survival::forest::component_features(spec), beta));
        }
    }
    if dataset.is_empty() {
        return Err(CliError::Usage(
            "no fitted curves match the fleet's component ids".into(),
        ));
    }
    let model = upkeep::survival::train_forest(
        &dataset,
        &config.forest.config(),
        config.forest.seed,
    )
    .map_err(runtime)?;
    let path = out_dir.join("forest.json");
    model.save(&path).map_err(runtime)?;
    let mut manifest = RunManifest::new(
        "train-forest",
        config_hash(&config.forest),
        vec![config.forest.seed],
    );
    manifest.record_artifact(&path).map_err(runtime)?;
    manifest.write(out_dir, "train-forest").map_err(runtime)?;
    println!(
        "wrote {} ({} trees on {} rows)",
        path.display(),
        model.trees.len(),
        dataset.len()
    );
    Ok(())
}

fn cmd_allocate(
    config: &ExperimentConfig,
    out_dir: &Path,
    curves: Option<PathBuf>,
    budget: Option<u64>,
    method: Option<&str>,
) -> Result<(), CliError> {
    let curves_path = curves.unwrap_or_else(|| out_dir.join("curves.csv"));
    if !curves_path.exists() {
        return Err(CliError::Usage(format!(
            "curve table {} not found; run `upkeep fit-curves` first or pass --curves",
            curves_path.display()
        )));
    }
    let table = read_curve_csv(&curves_path).map_err(usage)?;
    let curve_list: Vec<SurvivalCurve> = table.into_iter().map(|(c, _)| c).collect();
    let method = method.unwrap_or(&config.allocation.method).to_string();
    let total_budget = budget
        .or(config.fleet.total_budget)
        .unwrap_or(500 * curve_list.len() as u64);

    let result = match method.as_str() {
        "kkt" => allocate_kkt(&curve_list, total_budget, config.allocation.tolerance)
            .map_err(runtime)?,
        "bruteforce" => allocate_bruteforce(&curve_list, total_budget, config.allocation.grid)
            .map_err(runtime)?,
        "proportional" => {
            let fleet = load_fleet(config, out_dir)?;
            let lifetimes: Vec<f64> = fleet
                .components
                .iter()
                .map(|spec| {
                    expected_unrepaired_lifetime(
                        spec,
                        config.evaluate.lifetime_samples,
                        config.evaluate.seed,
                    )
                    .map(|(m, _)| m)
                })
                .collect::<Result<_, _>>()
                .map_err(runtime)?;
            allocate_proportional(&fleet.components, &lifetimes, total_budget)
                .map_err(runtime)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown allocation method {other:?}; valid methods: kkt, bruteforce, proportional"
            )))
        }
    };
    result.validate(total_budget).map_err(runtime)?;
    let path = out_dir.join("allocation.csv");
    write_allocation_csv(&path, &curve_list, &result, &method).map_err(runtime)?;
    let mut manifest = RunManifest::new("allocate", config_hash(&config.allocation), vec![]);
    manifest.record_artifact(&path).map_err(runtime)?;
    manifest.write(out_dir, "allocate").map_err(runtime)?;
    println!(
        "wrote {} (spent {} of {}, objective {:.1})",
        path.display(),
        result.spent(),
        total_budget,
        result.objective_estimate
    );
    Ok(())
}

fn cmd_evaluate(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let fleet = load_fleet(config, out_dir)?;
    let kinds: Vec<PolicyKind> = config
        .evaluate
        .policies
        .iter()
        .map(|name| PolicyKind::parse(name))
        .collect::<Result<_, _>>()?;

    let guided = if kinds.contains(&PolicyKind::Guided) {
        Some(load_params(out_dir, "guided")?)
    } else {
        None
    };
    let vanilla = if kinds.contains(&PolicyKind::Vanilla) {
        Some(load_params(out_dir, "vanilla")?)
    } else {
        None
    };
    let roster = PolicyRoster {
        oracle: kinds.contains(&PolicyKind::Oracle),
        guided: guided.as_ref(),
        heuristic: kinds.contains(&PolicyKind::Heuristic).then_some((
            config.evaluate.heuristic_interval,
            config.evaluate.heuristic_threshold,
        )),
        vanilla: vanilla.as_ref(),
    };
    let opts = SweepOptions {
        runs: config.evaluate.runs,
        seed: config.evaluate.seed,
        n_particles: config.evaluate.particles,
        oracle_cache: Some(oracle_cache_dir(out_dir)),
        ..SweepOptions::default()
    };
    let outcome = run_policy_sweep(&fleet, &config.evaluate.budget_grid, &roster, &opts)?;
    let path = out_dir.join("metrics.csv");
    write_metrics_csv(&path, &outcome.rows, fleet.horizon)?;
    let mut manifest = RunManifest::new(
        "evaluate",
        config_hash(&config.evaluate),
        vec![config.evaluate.seed],
    );
    manifest.record_artifact(&path).map_err(runtime)?;
    manifest.write(out_dir, "evaluate").map_err(runtime)?;
    println!(
        "wrote {} ({} rows over {} episodes; safety violations: {} cost, {} monotonicity)",
        path.display(),
        outcome.rows.len(),
        outcome.episodes,
        outcome.safety.cost_violations,
        outcome.safety.monotonicity_violations
    );
    Ok(())
}

fn cmd_scaling(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let guided = load_params(out_dir, "guided")?;
    let forest_path = out_dir.join("forest.json");
    if !forest_path.exists() {
        return Err(CliError::Usage(format!(
            "forest model {} not found; run `upkeep train-forest` first",
            forest_path.display()
        )));
    }
    let model = ForestModel::load(&forest_path).map_err(usage)?;
    let study = run_scaling_study(&config.scaling, &guided, &model)?;
    let path = out_dir.join("timing.csv");
    write_timing_csv(&path, &study)?;
    let summary_path = out_dir.join("scaling-summary.json");
    let summary = serde_json::json!({
        "config_hash": format!("{:016x}", config_hash(&config.scaling)),
        "slopes": study.slopes.iter().cloned().collect::<std::collections::BTreeMap<_, _>>(),
    });
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).map_err(runtime)?,
    )
    .map_err(runtime)?;
    let mut manifest = RunManifest::new(
        "scaling",
        config_hash(&config.scaling),
        vec![config.scaling.seed],
    );
    manifest.record_artifact(&path).map_err(runtime)?;
    manifest.record_artifact(&summary_path).map_err(runtime)?;
    manifest.write(out_dir, "scaling").map_err(runtime)?;
    for (stage, slope) in &study.slopes {
        println!("{stage}: log-log slope {slope:.3}");
    }
    Ok(())
}

fn cmd_pipeline(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    cmd_gen_fleet(config, out_dir)?;
    cmd_train(config, out_dir, None)?;
    cmd_fit_curves(config, out_dir)?;
    cmd_train_forest(config, out_dir)?;
    cmd_allocate(config, out_dir, None, None, None)?;
    cmd_evaluate(config, out_dir)?;

    // Allocation-strategy comparison under the trained guided agent.
    let fleet = load_fleet(config, out_dir)?;
    let guided = load_params(out_dir, "guided")?;
    let compare_cfg = AllocCompareConfig {
        curve_fit: config.curves.clone(),
        forest: config.forest.config(),
        forest_seed: config.forest.seed,
        eval_runs: config.evaluate.allocation_eval_runs,
        lifetime_samples: config.evaluate.lifetime_samples,
        seed: config.evaluate.seed,
        n_particles: config.evaluate.particles,
        kkt_tolerance: config.allocation.tolerance,
    };
    let comparison = run_allocation_comparison(
        &fleet,
        &guided,
        &compare_cfg,
        Some(&oracle_cache_dir(out_dir)),
    )?;
    let dist_path = out_dir.join("allocation-distributions.csv");
    write_distribution_csv(&dist_path, &fleet, &comparison)?;

    cmd_scaling(config, out_dir)?;

    let summary_path = out_dir.join("pipeline-summary.json");
    let stage_manifests = [
        "gen-fleet",
        "train",
        "fit-curves",
        "train-forest",
        "allocate",
        "evaluate",
        "scaling",
    ]
    .iter()
    .map(|s| format!("{s}.manifest.json"))
    .collect::<Vec<_>>();
    let summary = serde_json::json!({
        "config_hash": format!("{:016x}", config_hash(config)),
        "t_max_rf": comparison.t_max_rf,
        "t_max_baseline": comparison.t_max_baseline,
        "stages": stage_manifests,
    });
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).map_err(runtime)?,
    )
    .map_err(runtime)?;
    let mut manifest = RunManifest::new("pipeline", config_hash(config), vec![]);
    manifest.record_artifact(&dist_path).map_err(runtime)?;
    manifest.record_artifact(&summary_path).map_err(runtime)?;
    manifest.write(out_dir, "pipeline").map_err(runtime)?;
    println!(
        "pipeline complete: total survival {:.1} (forest allocation) vs {:.1} (proportional baseline)",
        comparison.t_max_rf, comparison.t_max_baseline
    );
    Ok(())
}
