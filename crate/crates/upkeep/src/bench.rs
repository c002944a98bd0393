//! End-to-end experiment harness: policy comparison across budget levels,
//! allocation-strategy comparison, and the per-stage timing/scaling study.
//!
//! Comparisons use paired seeds: within one (component, budget, run) cell
//! every policy sees the same environment seed, so policy differences are
//! not drowned in simulation noise and reruns reproduce the same tables.
//! Sweep cells execute in parallel with per-cell seed streams; results are
//! assembled in index order so thread scheduling never changes an output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    heuristic_policy, ActMode, AgentError, GuidedDecision, PolicyParameters, VanillaDecision,
};
use crate::alloc::{allocate_kkt, allocate_proportional, AllocError};
use crate::model::{
    expected_unrepaired_lifetime, AllocationResult, ComponentSpec, Fleet, ModelError,
};
use crate::oracle::{OracleDecision, OracleError, OracleLimits, OraclePolicy};
use crate::seeding::derive_seed;
use crate::sim::{
    run_episode, ComponentEnv, DecisionPolicy, EpisodeOptions, EpisodeRecord, SafetyTally,
    SimError,
};
use crate::survival::{
    boundary_parameters, fit_beta, forest, zero_budget_survival, SurvivalCurve, SurvivalError,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("missing artifact {path}: {hint}")]
    MissingArtifact { path: PathBuf, hint: String },
    #[error("metrics row violates its invariants: {0}")]
    InvalidMetrics(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Survival(#[from] SurvivalError),
    #[error("harness i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// The four policies the harness knows how to drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Oracle,
    Guided,
    Heuristic,
    Vanilla,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Oracle,
        PolicyKind::Guided,
        PolicyKind::Heuristic,
        PolicyKind::Vanilla,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Oracle => "oracle",
            PolicyKind::Guided => "guided",
            PolicyKind::Heuristic => "heuristic",
            PolicyKind::Vanilla => "vanilla",
        }
    }

    pub fn parse(name: &str) -> Result<Self, BenchError> {
        match name {
            "oracle" => Ok(PolicyKind::Oracle),
            "guided" => Ok(PolicyKind::Guided),
            "heuristic" => Ok(PolicyKind::Heuristic),
            "vanilla" => Ok(PolicyKind::Vanilla),
            other => Err(BenchError::InvalidConfig(format!(
                "unknown policy {other:?}; valid policies: oracle, guided, heuristic, vanilla"
            ))),
        }
    }
}

/// One aggregated cell of a policy sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub policy: String,
    pub budget: u64,
    pub mean_survival: f64,
    pub mean_repairs: f64,
    pub mean_cost: f64,
    pub runs: u64,
    pub std_error: f64,
}

impl MetricsRow {
    /// Invariants re-checked before any row is written out.
    pub fn validate(&self, horizon: u32) -> Result<(), BenchError> {
        if self.mean_cost > self.budget as f64 + 1e-9 {
            return Err(BenchError::InvalidMetrics(format!(
                "mean cost {} exceeds budget {}",
                self.mean_cost, self.budget
            )));
        }
        if self.mean_survival > f64::from(horizon) + 1e-9 {
            return Err(BenchError::InvalidMetrics(format!(
                "mean survival {} exceeds horizon {horizon}",
                self.mean_survival
            )));
        }
        if self.runs == 0 {
            return Err(BenchError::InvalidMetrics("empty cell".into()));
        }
        Ok(())
    }
}

/// Per-episode samples for one (policy, budget) cell, aligned across
/// policies: index `k` is the same (component, run, seed) everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub policy: PolicyKind,
    pub budget: u64,
    pub survivals: Vec<f64>,
    pub repairs: Vec<f64>,
    pub costs: Vec<f64>,
}

/// Everything a policy sweep produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<MetricsRow>,
    pub cells: Vec<SweepCell>,
    pub safety: SafetyTally,
    pub episodes: u64,
}

impl SweepOutcome {
    pub fn cell(&self, policy: PolicyKind, budget: u64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.policy == policy && c.budget == budget)
    }
}

/// Policies available to a sweep; learned policies carry their parameters.
#[derive(Debug, Clone, Copy)]
pub struct PolicyRoster<'a> {
    pub oracle: bool,
    pub guided: Option<&'a PolicyParameters>,
    /// Inspection interval and repair threshold.
    pub heuristic: Option<(u32, u32)>,
    pub vanilla: Option<&'a PolicyParameters>,
}

impl PolicyRoster<'_> {
    fn kinds(&self) -> Vec<PolicyKind> {
        let mut kinds = Vec::new();
        if self.oracle {
            kinds.push(PolicyKind::Oracle);
        }
        if self.guided.is_some() {
            kinds.push(PolicyKind::Guided);
        }
        if self.heuristic.is_some() {
            kinds.push(PolicyKind::Heuristic);
        }
        if self.vanilla.is_some() {
            kinds.push(PolicyKind::Vanilla);
        }
        kinds
    }
}

/// Sweep execution knobs.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub runs: u32,
    pub seed: u64,
    pub n_particles: usize,
    /// Directory for oracle table caches; tables are rebuilt when absent.
    pub oracle_cache: Option<PathBuf>,
    /// How the learned policies pick actions. Sampling evaluates the
    /// stochastic policy the optimizer actually trained (each episode's
    /// draw is seeded, so sweeps stay reproducible); greedy evaluates its
    /// deterministic argmax.
    pub act_mode: ActMode,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            runs: 100,
            seed: 0,
            n_particles: crate::belief::DEFAULT_PARTICLES,
            oracle_cache: None,
            act_mode: ActMode::Sample,
        }
    }
}

fn oracle_for(
    spec: &ComponentSpec,
    budget: u64,
    horizon: u32,
    cache: Option<&Path>,
) -> Result<OraclePolicy, OracleError> {
    match cache {
        Some(dir) => OraclePolicy::cached_or_build(dir, spec, budget, horizon, &OracleLimits::default()),
        None => crate::oracle::build_oracle(spec, budget, horizon, &OracleLimits::default()),
    }
}

/// Episodes for every policy on one (component, budget) cell, paired by run
/// seed. Returns per-policy records in roster order.
fn run_component_cell(
    spec: &ComponentSpec,
    horizon: u32,
    budget: u64,
    roster: &PolicyRoster<'_>,
    opts: &SweepOptions,
) -> Result<Vec<(PolicyKind, Vec<EpisodeRecord>)>, BenchError> {
    let env = ComponentEnv::new(spec.clone(), horizon)?;
    let kinds = roster.kinds();
    let needs_oracle = roster.oracle || roster.guided.is_some();
    let oracle = if needs_oracle {
        Some(oracle_for(
            spec,
            budget,
            horizon,
            opts.oracle_cache.as_deref(),
        )?)
    } else {
        None
    };
    let episode_opts = EpisodeOptions {
        n_particles: opts.n_particles,
        record_trajectory: false,
    };
    let mut out = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let mut policy: Box<dyn DecisionPolicy> = match kind {
            PolicyKind::Oracle => Box::new(OracleDecision::new(oracle.as_ref().expect("oracle"))),
            PolicyKind::Guided => Box::new(GuidedDecision::new(
                roster.guided.expect("guided params"),
                oracle.as_ref().expect("oracle"),
                opts.act_mode,
            )),
            PolicyKind::Heuristic => {
                let (interval, threshold) = roster.heuristic.expect("heuristic config");
                Box::new(heuristic_policy(interval, threshold)?)
            }
            PolicyKind::Vanilla => Box::new(VanillaDecision::new(
                roster.vanilla.expect("vanilla params"),
                opts.act_mode,
            )),
        };
        let mut records = Vec::with_capacity(opts.runs as usize);
        for run in 0..opts.runs {
            // Identical seed across policies: paired comparisons.
            let seed = derive_seed(
                opts.seed,
                &[0x5eed, budget, crate::seeding::fnv1a64(spec.id.as_bytes()), u64::from(run)],
            );
            records.push(run_episode(&env, budget, policy.as_mut(), seed, &episode_opts)?);
        }
        out.push((kind, records));
    }
    Ok(out)
}

fn summarize_cell(policy: PolicyKind, budget: u64, records: &[&EpisodeRecord]) -> (MetricsRow, SweepCell) {
    let n = records.len() as f64;
    let survivals: Vec<f64> = records.iter().map(|r| f64::from(r.survival_time)).collect();
    let repairs: Vec<f64> = records.iter().map(|r| f64::from(r.repairs)).collect();
    let costs: Vec<f64> = records.iter().map(|r| r.total_cost as f64).collect();
    let mean = survivals.iter().sum::<f64>() / n;
    let var = survivals.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n.max(1.0);
    let row = MetricsRow {
        policy: policy.name().to_string(),
        budget,
        mean_survival: mean,
        mean_repairs: repairs.iter().sum::<f64>() / n,
        mean_cost: costs.iter().sum::<f64>() / n,
        runs: records.len() as u64,
        std_error: (var / n).sqrt(),
    };
    let cell = SweepCell {
        policy,
        budget,
        survivals,
        repairs,
        costs,
    };
    (row, cell)
}

/// Runs every roster policy over `budgets x fleet x runs` with paired seeds
/// and aggregates one [`MetricsRow`] per (policy, budget).
pub fn run_policy_sweep(
    fleet: &Fleet,
    budgets: &[u64],
    roster: &PolicyRoster<'_>,
    opts: &SweepOptions,
) -> Result<SweepOutcome, BenchError> {
    if budgets.is_empty() || fleet.components.is_empty() || opts.runs == 0 {
        return Err(BenchError::InvalidConfig(
            "need budgets, components and runs".into(),
        ));
    }
    if roster.kinds().is_empty() {
        return Err(BenchError::InvalidConfig("empty policy roster".into()));
    }
    let horizon = fleet.horizon;

    // (budget, component) cells in parallel; deterministic because every
    // cell derives its own seeds and results are reduced in index order.
    let mut tasks = Vec::new();
    for &budget in budgets {
        for spec in &fleet.components {
            tasks.push((budget, spec));
        }
    }
    let cell_results: Vec<Result<Vec<(PolicyKind, Vec<EpisodeRecord>)>, BenchError>> = tasks
        .par_iter()
        .map(|(budget, spec)| run_component_cell(spec, horizon, *budget, roster, opts))
        .collect();

    let mut safety = SafetyTally::default();
    let mut episodes = 0u64;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &budget in budgets {
        for kind in roster.kinds() {
            // Gather this (budget, policy) across components in task order.
            let mut records: Vec<&EpisodeRecord> = Vec::new();
            for (task_idx, (task_budget, _)) in tasks.iter().enumerate() {
                if *task_budget != budget {
                    continue;
                }
                let per_policy = cell_results[task_idx].as_ref().map_err(|e| {
                    BenchError::InvalidConfig(format!("cell failed: {e}"))
                })?;
                let (_, recs) = per_policy
                    .iter()
                    .find(|(k, _)| *k == kind)
                    .expect("kind present");
                records.extend(recs.iter());
            }
            for r in &records {
                safety.absorb(&r.safety);
                episodes += 1;
            }
            let (row, cell) = summarize_cell(kind, budget, &records);
            row.validate(horizon)?;
            rows.push(row);
            cells.push(cell);
        }
    }
    Ok(SweepOutcome {
        rows,
        cells,
        safety,
        episodes,
    })
}

/// Writes metrics rows as CSV
/// `(policy, budget, mean_survival, mean_repairs, mean_cost, runs,
/// std_error)`, re-validating every row first.
pub fn write_metrics_csv(
    path: &Path,
    rows: &[MetricsRow],
    horizon: u32,
) -> Result<(), BenchError> {
    let mut out =
        String::from("policy,budget,mean_survival,mean_repairs,mean_cost,runs,std_error\n");
    for row in rows {
        row.validate(horizon)?;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.policy,
            row.budget,
            row.mean_survival,
            row.mean_repairs,
            row.mean_cost,
            row.runs,
            row.std_error
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Configuration for the survival-curve fitting stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveFitConfig {
    /// Budget levels of the sweep; should include 0.
    pub budget_grid: Vec<u64>,
    /// Episodes per (component, budget) cell.
    pub runs: u32,
    pub seed: u64,
    pub n_particles: usize,
}

impl Default for CurveFitConfig {
    fn default() -> Self {
        Self {
            budget_grid: (0..=10).map(|i| i * 500).collect(),
            runs: 30,
            seed: 0xf17,
            n_particles: crate::belief::DEFAULT_PARTICLES,
        }
    }
}

/// Which policy generates the `(budget, survival)` pairs a curve is fitted
/// from. Guided reproduces the conditions the curves are later used under;
/// the cheaper drivers exist for dataset generation at scale.
#[derive(Debug, Clone, Copy)]
pub enum CurveFitPolicy<'a> {
    Oracle,
    Guided(&'a PolicyParameters),
    Heuristic { interval: u32, threshold: u32 },
}

/// Fits a survival curve per component from episodes under the chosen
/// policy: zero-budget survival pins `alpha` and `gamma`, mean survival at
/// each positive budget level feeds the `beta` fit.
pub fn fit_fleet_curves(
    fleet: &Fleet,
    cfg: &CurveFitConfig,
    oracle_cache: Option<&Path>,
    fit_policy: CurveFitPolicy<'_>,
) -> Result<Vec<SurvivalCurve>, BenchError> {
    if cfg.budget_grid.len() < 2 {
        return Err(BenchError::InvalidConfig(
            "curve fitting needs at least two budget levels".into(),
        ));
    }
    let horizon = fleet.horizon;
    let curves: Vec<Result<SurvivalCurve, BenchError>> = fleet
        .components
        .par_iter()
        .map(|spec| {
            let t0 = zero_budget_survival(
                spec,
                horizon,
                cfg.runs.max(1),
                derive_seed(cfg.seed, &[0x20, spec.content_hash()]),
            )?;
            let (alpha, gamma) = boundary_parameters(t0.max(1e-9), horizon)?;
            let env = ComponentEnv::new(spec.clone(), horizon)?;
            let mut pairs: Vec<(f64, f64)> = vec![(0.0, t0)];
            for &budget in &cfg.budget_grid {
                if budget == 0 {
                    continue;
                }
                let needs_oracle = matches!(
                    fit_policy,
                    CurveFitPolicy::Oracle | CurveFitPolicy::Guided(_)
                );
                let oracle = if needs_oracle {
                    Some(oracle_for(spec, budget, horizon, oracle_cache)?)
                } else {
                    None
                };
                let mut policy: Box<dyn DecisionPolicy + '_> = match fit_policy {
                    CurveFitPolicy::Oracle => {
                        Box::new(OracleDecision::new(oracle.as_ref().expect("oracle")))
                    }
                    CurveFitPolicy::Guided(params) => Box::new(GuidedDecision::new(
                        params,
                        oracle.as_ref().expect("oracle"),
                        ActMode::Sample,
                    )),
                    CurveFitPolicy::Heuristic {
                        interval,
                        threshold,
                    } => Box::new(heuristic_policy(interval, threshold)?),
                };
                let mut total = 0.0;
                for run in 0..cfg.runs {
                    let seed = derive_seed(
                        cfg.seed,
                        &[0x21, spec.content_hash(), budget, u64::from(run)],
                    );
                    let record = run_episode(
                        &env,
                        budget,
                        policy.as_mut(),
                        seed,
                        &EpisodeOptions {
                            n_particles: cfg.n_particles,
                            record_trajectory: false,
                        },
                    )?;
                    total += f64::from(record.survival_time);
                }
                pairs.push((budget as f64, total / f64::from(cfg.runs)));
            }
            let beta = fit_beta(&pairs, alpha, gamma)?;
            Ok(SurvivalCurve::new(spec.id.clone(), alpha, beta, gamma)?)
        })
        .collect();
    curves.into_iter().collect()
}

/// Outcome of the allocation-strategy comparison.
#[derive(Debug, Clone)]
pub struct AllocationComparison {
    /// Mean total survival under the forest-predicted curve allocation.
    pub t_max_rf: f64,
    /// Mean total survival under the proportional baseline allocation.
    pub t_max_baseline: f64,
    /// Per-component survival samples (aligned run seeds) under each arm.
    pub per_component_rf: Vec<Vec<f64>>,
    pub per_component_baseline: Vec<Vec<f64>>,
    pub rf_allocation: AllocationResult,
    pub baseline_allocation: AllocationResult,
    pub predicted_curves: Vec<SurvivalCurve>,
    pub fitted_curves: Vec<SurvivalCurve>,
    pub safety: SafetyTally,
    pub episodes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocCompareConfig {
    pub curve_fit: CurveFitConfig,
    pub forest: forest::ForestConfig,
    pub forest_seed: u64,
    /// Episodes per component when evaluating each allocation arm.
    pub eval_runs: u32,
    /// Monte-Carlo samples for the expected unrepaired lifetime.
    pub lifetime_samples: usize,
    pub seed: u64,
    pub n_particles: usize,
    pub kkt_tolerance: f64,
}

impl Default for AllocCompareConfig {
    fn default() -> Self {
        Self {
            curve_fit: CurveFitConfig::default(),
            forest: forest::ForestConfig::default(),
            forest_seed: 0xf03e57,
            eval_runs: 100,
            lifetime_samples: 400,
            seed: 0xa11,
            n_particles: crate::belief::DEFAULT_PARTICLES,
            kkt_tolerance: 1e-6,
        }
    }
}

/// Evaluates one allocation arm: paired-seed guided episodes per component
/// at its allocated budget.
fn evaluate_allocation(
    fleet: &Fleet,
    allocation: &AllocationResult,
    guided: &PolicyParameters,
    eval_runs: u32,
    seed: u64,
    n_particles: usize,
    oracle_cache: Option<&Path>,
) -> Result<(Vec<Vec<f64>>, SafetyTally, u64), BenchError> {
    let horizon = fleet.horizon;
    let per_component: Vec<Result<(Vec<f64>, SafetyTally), BenchError>> = fleet
        .components
        .par_iter()
        .zip(&allocation.budgets)
        .map(|(spec, &budget)| {
            let env = ComponentEnv::new(spec.clone(), horizon)?;
            let oracle = oracle_for(spec, budget, horizon, oracle_cache)?;
            let mut policy = GuidedDecision::new(guided, &oracle, ActMode::Sample);
            let mut survivals = Vec::with_capacity(eval_runs as usize);
            let mut safety = SafetyTally::default();
            for run in 0..eval_runs {
                // Seeds keyed by (component, run) only, so both arms pair up.
                let episode_seed =
                    derive_seed(seed, &[0x7a1, spec.content_hash(), u64::from(run)]);
                let record = run_episode(
                    &env,
                    budget,
                    &mut policy,
                    episode_seed,
                    &EpisodeOptions {
                        n_particles,
                        record_trajectory: false,
                    },
                )?;
                safety.absorb(&record.safety);
                survivals.push(f64::from(record.survival_time));
            }
            Ok((survivals, safety))
        })
        .collect();
    let mut out = Vec::with_capacity(fleet.components.len());
    let mut safety = SafetyTally::default();
    let mut episodes = 0u64;
    for r in per_component {
        let (survivals, s) = r?;
        episodes += survivals.len() as u64;
        safety.absorb(&s);
        out.push(survivals);
    }
    Ok((out, safety, episodes))
}

/// Compares forest-driven budget allocation against the proportional
/// baseline, evaluating both with the same guided policy and paired seeds.
pub fn run_allocation_comparison(
    fleet: &Fleet,
    guided: &PolicyParameters,
    cfg: &AllocCompareConfig,
    oracle_cache: Option<&Path>,
) -> Result<AllocationComparison, BenchError> {
    // Fit per-component curves under the same guided policy used for
    // evaluation, then train the forest on the fitted betas and predict.
    let fitted = fit_fleet_curves(
        fleet,
        &cfg.curve_fit,
        oracle_cache,
        CurveFitPolicy::Guided(guided),
    )?;
    let dataset: Vec<([f64; forest::N_FEATURES], f64)> = fleet
        .components
        .iter()
        .zip(&fitted)
        .map(|(spec, curve)| (forest::component_features(spec), curve.beta))
        .collect();
    let model = forest::train_forest(&dataset, &cfg.forest, cfg.forest_seed)?;
    let predicted: Vec<SurvivalCurve> = fleet
        .components
        .iter()
        .zip(&fitted)
        .map(|(spec, curve)| {
            SurvivalCurve::new(
                spec.id.clone(),
                curve.alpha,
                forest::predict_beta(&model, spec),
                curve.gamma,
            )
        })
        .collect::<Result<_, _>>()?;

    let rf_allocation = allocate_kkt(&predicted, fleet.total_budget, cfg.kkt_tolerance)?;

    let lifetimes: Vec<f64> = fleet
        .components
        .iter()
        .map(|spec| {
            expected_unrepaired_lifetime(
                spec,
                cfg.lifetime_samples,
                derive_seed(cfg.seed, &[0x11fe, spec.content_hash()]),
            )
            .map(|(mean, _)| mean)
        })
        .collect::<Result<_, _>>()?;
    let baseline_allocation =
        allocate_proportional(&fleet.components, &lifetimes, fleet.total_budget)?;

    let (per_component_rf, safety_rf, episodes_rf) = evaluate_allocation(
        fleet,
        &rf_allocation,
        guided,
        cfg.eval_runs,
        cfg.seed,
        cfg.n_particles,
        oracle_cache,
    )?;
    let (per_component_baseline, safety_base, episodes_base) = evaluate_allocation(
        fleet,
        &baseline_allocation,
        guided,
        cfg.eval_runs,
        cfg.seed,
        cfg.n_particles,
        oracle_cache,
    )?;

    let sum_of_means = |per: &Vec<Vec<f64>>| -> f64 {
        per.iter()
            .map(|s| s.iter().sum::<f64>() / s.len().max(1) as f64)
            .sum()
    };
    let mut safety = safety_rf;
    safety.absorb(&safety_base);
    Ok(AllocationComparison {
        t_max_rf: sum_of_means(&per_component_rf),
        t_max_baseline: sum_of_means(&per_component_baseline),
        per_component_rf,
        per_component_baseline,
        rf_allocation,
        baseline_allocation,
        predicted_curves: predicted,
        fitted_curves: fitted,
        safety,
        episodes: episodes_rf + episodes_base,
    })
}

/// Writes per-component survival distributions for both allocation arms:
/// `(component_id, method, run, survival)`.
pub fn write_distribution_csv(
    path: &Path,
    fleet: &Fleet,
    comparison: &AllocationComparison,
) -> Result<(), BenchError> {
    let mut out = String::from("component_id,method,run,survival\n");
    for (arm, per) in [
        ("rf", &comparison.per_component_rf),
        ("baseline", &comparison.per_component_baseline),
    ] {
        for (spec, survivals) in fleet.components.iter().zip(per) {
            for (run, s) in survivals.iter().enumerate() {
                out.push_str(&format!("{},{arm},{run},{s}\n", spec.id));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Wall-clock measurement of one pipeline stage at one fleet size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub stage: String,
    pub n_components: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

/// Timing table plus per-stage log-log slopes of time versus fleet size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub rows: Vec<TimingRow>,
    /// Stage name -> least-squares slope of ln(time) against ln(n).
    pub slopes: Vec<(String, f64)>,
    pub safety: SafetyTally,
    pub episodes: u64,
}

pub const SCALING_STAGES: [&str; 4] = [
    "forest_prediction",
    "budget_split",
    "value_iteration",
    "policy_application",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingConfig {
    pub counts: Vec<usize>,
    pub repeats: u32,
    pub seed: u64,
    /// Episodes per component in the policy-application stage.
    pub episodes_per_component: u32,
    /// Budget units per component (total budget scales with n).
    pub budget_per_component: u64,
    pub n_particles: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            counts: vec![10, 20, 40, 80, 160],
            repeats: 3,
            seed: 0x5ca1e,
            episodes_per_component: 5,
            budget_per_component: 500,
            n_particles: 256,
        }
    }
}

fn lsq_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Times the four pipeline stages across fleet sizes, single-threaded so the
/// slope of time against size is clean. The forest and the guided agent are
/// prepared once outside the timed region; each repeat regenerates the fleet
/// and runs every stage in sequence.
pub fn run_scaling_study(
    cfg: &ScalingConfig,
    guided: &PolicyParameters,
    model: &forest::ForestModel,
) -> Result<ScalingStudy, BenchError> {
    if cfg.counts.len() < 2 || cfg.repeats == 0 {
        return Err(BenchError::InvalidConfig(
            "need at least two fleet sizes and one repeat".into(),
        ));
    }
    if cfg.counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::InvalidConfig(
            "fleet sizes must be strictly increasing".into(),
        ));
    }
    let mut samples: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::new(); cfg.counts.len()]; SCALING_STAGES.len()];
    let mut safety = SafetyTally::default();
    let mut episodes = 0u64;

    // One component pool per repeat; each fleet size takes a strictly
    // nested prefix, so composition drift never pollutes the slopes.
    let max_count = *cfg.counts.last().expect("counts nonempty");
    for repeat in 0..cfg.repeats {
        let pool = crate::model::generate_fleet(
            max_count,
            derive_seed(cfg.seed, &[u64::from(repeat)]),
            crate::model::CostRanges::defaults(),
            crate::model::WeibullRanges::defaults(),
        )?;
        for (size_idx, &n) in cfg.counts.iter().enumerate() {
            let fleet = Fleet::new(
                pool.components[..n].to_vec(),
                cfg.budget_per_component * n as u64,
                pool.horizon,
            )?;
            let horizon = fleet.horizon;

            // Stage 1: forest prediction of every component's beta.
            let start = Instant::now();
            let betas: Vec<f64> = fleet
                .components
                .iter()
                .map(|spec| forest::predict_beta(model, spec))
                .collect();
            samples[0][size_idx].push(start.elapsed().as_secs_f64());

            // Curves for the split stage (zero-budget survival approximated
            // analytically from the kernel mean; this stage times the
            // allocator, not episode simulation).
            let curves: Vec<SurvivalCurve> = fleet
                .components
                .iter()
                .zip(&betas)
                .map(|(spec, &beta)| {
                    let t0 = (spec.weibull_scale.min(f64::from(horizon))).max(1.0);
                    let (alpha, gamma) = boundary_parameters(t0, horizon)?;
                    Ok(SurvivalCurve::new(spec.id.clone(), alpha, beta, gamma)?)
                })
                .collect::<Result<_, BenchError>>()?;

            // Stage 2: budget split.
            let start = Instant::now();
            let allocation = allocate_kkt(&curves, fleet.total_budget, 1e-6)?;
            samples[1][size_idx].push(start.elapsed().as_secs_f64());

            // Stage 3: value iteration per (component, allocated budget).
            let start = Instant::now();
            let mut oracles = Vec::with_capacity(n);
            for (spec, &budget) in fleet.components.iter().zip(&allocation.budgets) {
                oracles.push(crate::oracle::build_oracle(
                    spec,
                    budget,
                    horizon,
                    &OracleLimits::default(),
                )?);
            }
            samples[2][size_idx].push(start.elapsed().as_secs_f64());

            // Stage 4: applying the trained policy to every component.
            let start = Instant::now();
            for ((spec, &budget), oracle) in fleet
                .components
                .iter()
                .zip(&allocation.budgets)
                .zip(&oracles)
            {
                let env = ComponentEnv::new(spec.clone(), horizon)?;
                let mut policy = GuidedDecision::new(guided, oracle, ActMode::Sample);
                for run in 0..cfg.episodes_per_component {
                    let seed = derive_seed(
                        cfg.seed,
                        &[0xa9, spec.content_hash(), u64::from(run), u64::from(repeat)],
                    );
                    let record = run_episode(
                        &env,
                        budget,
                        &mut policy,
                        seed,
                        &EpisodeOptions {
                            n_particles: cfg.n_particles,
                            record_trajectory: false,
                        },
                    )?;
                    safety.absorb(&record.safety);
                    episodes += 1;
                }
            }
            samples[3][size_idx].push(start.elapsed().as_secs_f64());
        }
    }

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for (stage_idx, stage) in SCALING_STAGES.iter().enumerate() {
        let mut points = Vec::new();
        for (size_idx, &n) in cfg.counts.iter().enumerate() {
            let times = &samples[stage_idx][size_idx];
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            let std = if times.len() > 1 {
                (times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>()
                    / (times.len() - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            rows.push(TimingRow {
                stage: stage.to_string(),
                n_components: n,
                mean_seconds: mean,
                std_seconds: std,
            });
            points.push(((n as f64).ln(), mean.max(1e-12).ln()));
        }
        slopes.push((stage.to_string(), lsq_slope(&points)));
    }
    Ok(ScalingStudy {
        rows,
        slopes,
        safety,
        episodes,
    })
}

/// Writes the timing table CSV
/// `(stage, n_components, mean_seconds, std_seconds)`.
pub fn write_timing_csv(path: &Path, study: &ScalingStudy) -> Result<(), BenchError> {
    let mut out = String::from("stage,n_components,mean_seconds,std_seconds\n");
    for row in &study.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.stage, row.n_components, row.mean_seconds, row.std_seconds
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Whole-experiment configuration, loadable from a TOML file. Every section
/// has defaults, so a config file only states what it changes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub fleet: FleetSection,
    pub training: TrainingSection,
    pub evaluate: EvaluateSection,
    pub curves: CurveFitConfig,
    pub forest: ForestSection,
    pub allocation: AllocationSection,
    pub scaling: ScalingConfig,
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::MissingArtifact {
            path: path.to_path_buf(),
            hint: format!("config not readable: {e}"),
        })?;
        Self::from_toml(&text)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetSection {
    /// Fleet file consumed (and written by `gen-fleet`/`pipeline`).
    pub path: Option<PathBuf>,
    pub count: usize,
    pub seed: u64,
    /// Total budget; defaults to 500 units per component when absent.
    pub total_budget: Option<u64>,
    pub horizon: u32,
    pub repair_cost: [u64; 2],
    pub inspect_cost: [u64; 2],
    pub weibull_shape: [f64; 2],
    pub weibull_scale: [f64; 2],
}

impl Default for FleetSection {
    fn default() -> Self {
        let costs = crate::model::CostRanges::defaults();
        let weibull = crate::model::WeibullRanges::defaults();
        Self {
            path: None,
            count: 50,
            seed: 42,
            total_budget: None,
            horizon: 100,
            repair_cost: [costs.repair_lo, costs.repair_hi],
            inspect_cost: [costs.inspect_lo, costs.inspect_hi],
            weibull_shape: [weibull.shape_lo, weibull.shape_hi],
            weibull_scale: [weibull.scale_lo, weibull.scale_hi],
        }
    }
}

impl FleetSection {
    pub fn generate(&self) -> Result<Fleet, BenchError> {
        let mut fleet = crate::model::generate_fleet(
            self.count,
            self.seed,
            crate::model::CostRanges {
                repair_lo: self.repair_cost[0],
                repair_hi: self.repair_cost[1],
                inspect_lo: self.inspect_cost[0],
                inspect_hi: self.inspect_cost[1],
            },
            crate::model::WeibullRanges {
                shape_lo: self.weibull_shape[0],
                shape_hi: self.weibull_shape[1],
                scale_lo: self.weibull_scale[0],
                scale_hi: self.weibull_scale[1],
            },
        )?;
        fleet.horizon = self.horizon;
        if let Some(budget) = self.total_budget {
            fleet.total_budget = budget;
        }
        Ok(fleet)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSection {
    pub steps: u64,
    pub seed: u64,
    /// Number of components meta-training samples from the fleet.
    pub subset: usize,
    /// Budget levels paired with the sampled components.
    pub budget_levels: Vec<u64>,
    pub rollout_horizon: usize,
    pub minibatch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub hidden: usize,
    pub particles: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let hyper = crate::agent::PpoHyper::default();
        Self {
            steps: 200_000,
            seed: 7,
            subset: 5,
            budget_levels: vec![500, 1000, 2500, 5000],
            rollout_horizon: hyper.rollout_horizon,
            minibatch: hyper.minibatch,
            epochs: hyper.epochs,
            learning_rate: hyper.learning_rate,
            discount: hyper.discount,
            gae_lambda: hyper.gae_lambda,
            clip: hyper.clip,
            entropy_coef: hyper.entropy_coef,
            value_coef: hyper.value_coef,
            hidden: hyper.hidden,
            particles: hyper.n_particles,
        }
    }
}

impl TrainingSection {
    pub fn hyper(&self) -> crate::agent::PpoHyper {
        crate::agent::PpoHyper {
            rollout_horizon: self.rollout_horizon,
            minibatch: self.minibatch,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            discount: self.discount,
            gae_lambda: self.gae_lambda,
            clip: self.clip,
            entropy_coef: self.entropy_coef,
            value_coef: self.value_coef,
            hidden: self.hidden,
            n_particles: self.particles,
            ..crate::agent::PpoHyper::default()
        }
    }

    /// Uniformly samples `subset` components (seeded, without replacement)
    /// and crosses them with the positive budget levels.
    pub fn pairs(&self, fleet: &Fleet) -> Result<Vec<(ComponentSpec, u64)>, BenchError> {
        if self.budget_levels.iter().all(|&b| b == 0) {
            return Err(BenchError::InvalidConfig(
                "training budget levels are all zero".into(),
            ));
        }
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[0x5e7]));
        let mut indices: Vec<usize> = (0..fleet.components.len()).collect();
        indices.shuffle(&mut rng);
        indices.truncate(self.subset.max(1).min(fleet.components.len()));
        indices.sort_unstable();
        let mut pairs = Vec::new();
        for &i in &indices {
            for &budget in &self.budget_levels {
                if budget > 0 {
                    pairs.push((fleet.components[i].clone(), budget));
                }
            }
        }
        Ok(pairs)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateSection {
    pub policies: Vec<String>,
    pub budget_grid: Vec<u64>,
    pub runs: u32,
    pub seed: u64,
    pub particles: usize,
    pub heuristic_interval: u32,
    pub heuristic_threshold: u32,
    /// Episodes per component when comparing allocation strategies.
    pub allocation_eval_runs: u32,
    pub lifetime_samples: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            policies: PolicyKind::ALL.iter().map(|p| p.name().to_string()).collect(),
            budget_grid: vec![0, 500, 1000, 2500, 5000],
            runs: 100,
            seed: 11,
            particles: crate::belief::DEFAULT_PARTICLES,
            heuristic_interval: 5,
            heuristic_threshold: 15,
            allocation_eval_runs: 100,
            lifetime_samples: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSection {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestSection {
    fn default() -> Self {
        let cfg = forest::ForestConfig::default();
        Self {
            trees: cfg.n_trees,
            max_depth: cfg.max_depth,
            min_leaf: cfg.min_leaf,
            seed: 17,
        }
    }
}

impl ForestSection {
    pub fn config(&self) -> forest::ForestConfig {
        forest::ForestConfig {
            n_trees: self.trees,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocationSection {
    pub method: String,
    pub tolerance: f64,
    pub grid: u64,
}

impl Default for AllocationSection {
    fn default() -> Self {
        Self {
            method: "kkt".into(),
            tolerance: 1e-6,
            grid: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{train_meta_ppo, PpoHyper};
    use crate::model::{generate_fleet, CostRanges, WeibullRanges};

    fn tiny_fleet(n: usize) -> Fleet {
        let mut fleet = generate_fleet(n, 77, CostRanges::defaults(), WeibullRanges::defaults())
            .unwrap();
        fleet.horizon = 40;
        fleet
    }

    fn tiny_params(fleet: &Fleet, guided: bool) -> PolicyParameters {
        let hyper = PpoHyper {
            rollout_horizon: 128,
            minibatch: 32,
            epochs: 1,
            hidden: 8,
            n_particles: 16,
            ..PpoHyper::default()
        };
        let pairs: Vec<_> = fleet
            .components
            .iter()
            .map(|s| (s.clone(), 400u64))
            .collect();
        train_meta_ppo(&pairs, fleet.horizon, 128, &hyper, guided, 5)
            .unwrap()
            .0
    }

    #[test]
    fn zero_budget_sweep_has_no_spending() {
        let fleet = tiny_fleet(2);
        let guided = tiny_params(&fleet, true);
        let vanilla = tiny_params(&fleet, false);
        let roster = PolicyRoster {
            oracle: true,
            guided: Some(&guided),
            heuristic: Some((5, 15)),
            vanilla: Some(&vanilla),
        };
        let opts = SweepOptions {
            runs: 5,
            seed: 1,
            n_particles: 16,
            ..SweepOptions::default()
        };
        let outcome = run_policy_sweep(&fleet, &[0], &roster, &opts).unwrap();
        assert_eq!(outcome.rows.len(), 4);
        for row in &outcome.rows {
            assert_eq!(row.mean_repairs, 0.0, "{row:?}");
            assert_eq!(row.mean_cost, 0.0, "{row:?}");
        }
        assert_eq!(outcome.safety, SafetyTally::default());
    }

    #[test]
    fn sweep_is_deterministic_and_paired() {
        let fleet = tiny_fleet(2);
        let guided = tiny_params(&fleet, true);
        let roster = PolicyRoster {
            oracle: true,
            guided: Some(&guided),
            heuristic: Some((5, 15)),
            vanilla: None,
        };
        let opts = SweepOptions {
            runs: 4,
            seed: 3,
            n_particles: 16,
            ..SweepOptions::default()
        };
        let a = run_policy_sweep(&fleet, &[0, 400], &roster, &opts).unwrap();
        let b = run_policy_sweep(&fleet, &[0, 400], &roster, &opts).unwrap();
        assert_eq!(a, b);
        // Paired alignment: every cell carries the same sample count in the
        // same (component, run) order.
        let oracle_cell = a.cell(PolicyKind::Oracle, 400).unwrap();
        let heuristic_cell = a.cell(PolicyKind::Heuristic, 400).unwrap();
        assert_eq!(oracle_cell.survivals.len(), heuristic_cell.survivals.len());
    }

    #[test]
    fn metrics_validation_catches_violations() {
        let row = MetricsRow {
            policy: "oracle".into(),
            budget: 100,
            mean_survival: 50.0,
            mean_repairs: 0.0,
            mean_cost: 200.0,
            runs: 10,
            std_error: 0.0,
        };
        assert!(row.validate(100).is_err());
        let row = MetricsRow {
            mean_cost: 50.0,
            mean_survival: 200.0,
            ..row
        };
        assert!(row.validate(100).is_err());
    }

    #[test]
    fn policy_kind_parse_rejects_unknown() {
        assert!(PolicyKind::parse("oracle").is_ok());
        let err = PolicyKind::parse("optimal").unwrap_err();
        assert!(err.to_string().contains("valid policies"));
    }

    #[test]
    fn curve_fitting_produces_admissible_curves() {
        let fleet = tiny_fleet(2);
        let cfg = CurveFitConfig {
            budget_grid: vec![0, 200, 400],
            runs: 6,
            seed: 5,
            n_particles: 16,
        };
        let curves = fit_fleet_curves(&fleet, &cfg, None, CurveFitPolicy::Oracle).unwrap();
        assert_eq!(curves.len(), 2);
        for c in &curves {
            assert!(c.alpha <= 0.0 && c.beta <= 0.0);
        }
    }

    #[test]
    fn scaling_study_measures_all_stages() {
        let fleet = tiny_fleet(2);
        let guided = tiny_params(&fleet, true);
        let dataset: Vec<_> = fleet
            .components
            .iter()
            .map(|s| (forest::component_features(s), -0.001))
            .collect();
        let model = forest::train_forest(
            &dataset,
            &forest::ForestConfig {
                n_trees: 5,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let cfg = ScalingConfig {
            counts: vec![2, 4],
            repeats: 1,
            seed: 2,
            episodes_per_component: 1,
            budget_per_component: 300,
            n_particles: 16,
        };
        let study = run_scaling_study(&cfg, &guided, &model).unwrap();
        assert_eq!(study.rows.len(), SCALING_STAGES.len() * 2);
        assert_eq!(study.slopes.len(), SCALING_STAGES.len());
        for row in &study.rows {
            assert!(row.mean_seconds >= 0.0);
        }
    }

    #[test]
    fn lsq_slope_recovers_linear_growth() {
        let points: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0]
            .iter()
            .map(|&n: &f64| (n.ln(), (0.37 * n).ln()))
            .collect();
        assert!((lsq_slope(&points) - 1.0).abs() < 1e-9);
    }
}
