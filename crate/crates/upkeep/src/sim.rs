//! Episode simulator for one budget-constrained component.
//!
//! The environment state couples the hidden condition index with the fully
//! observable cost ledger. A hard budget guard coerces any action the ledger
//! cannot afford into Degrade, so no episode can overspend; attempted
//! overshoots are counted and surface to the training reward separately.
//!
//! Episodes always run to the horizon. Survival time is the first step at
//! which the condition hits zero (capped at the horizon), and the trajectory
//! after absorption stays at zero whatever the policy does.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{self, DEFAULT_PARTICLES};
use crate::model::{ActionKind, ComponentSpec, DecayKernel, ModelError};
use crate::seeding::derive_seed;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot step at {step}: episode horizon is {horizon}")]
    PastHorizon { step: u32, horizon: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("episode csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("episode csv i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Full environment state for one component episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    /// True condition index in `[0, max_condition]`.
    pub condition: u32,
    /// Cost spent so far; never decreases.
    pub accrued_cost: u64,
    /// Decision step, `0..=horizon`.
    pub step: u32,
    /// Budget assigned to this component for the whole episode.
    pub allocated_budget: u64,
}

/// What the acting agent gets to see after a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observation {
    /// True condition, produced if and only if the action was Inspect.
    Exact(u32),
    /// No information.
    None,
}

/// One `(step, condition, action, cost)` entry of a recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: u32,
    pub condition: u32,
    pub action: ActionKind,
    pub accrued_cost: u64,
}

/// Invariant violations observed while running an episode. Both counters are
/// structurally zero; they exist so harnesses can assert that across large
/// sweeps instead of trusting the construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyTally {
    /// Steps whose cost ledger exceeded the allocated budget.
    pub cost_violations: u32,
    /// Non-repair transitions whose condition increased.
    pub monotonicity_violations: u32,
}

impl SafetyTally {
    pub fn absorb(&mut self, other: &SafetyTally) {
        self.cost_violations += other.cost_violations;
        self.monotonicity_violations += other.monotonicity_violations;
    }
}

/// Outcome of one simulated episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub component_id: String,
    pub seed: u64,
    pub budget: u64,
    pub policy_name: String,
    /// First step at which the condition reached 0, capped at the horizon.
    pub survival_time: u32,
    pub total_cost: u64,
    pub repairs: u32,
    pub inspections: u32,
    /// Actions the budget guard refused and replaced with Degrade.
    pub coerced_actions: u32,
    pub safety: SafetyTally,
    pub trajectory: Option<Vec<TrajectoryStep>>,
}

/// Everything a decision procedure is allowed to look at.
///
/// `true_condition` is not agent-visible information; it exists for the
/// full-observability oracle comparator and for reward bookkeeping. Learned
/// and heuristic policies must only read the belief features, the ledger and
/// the clock.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub spec: &'a ComponentSpec,
    pub step: u32,
    pub horizon: u32,
    pub belief_mean: f64,
    pub belief_variance: f64,
    pub accrued_cost: u64,
    pub allocated_budget: u64,
    pub true_condition: u32,
}

/// A per-step decision procedure driving one component.
pub trait DecisionPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ActionKind;
    /// Called once at episode start; stateful policies reseed here.
    fn reset(&mut self, _seed: u64) {}
    fn name(&self) -> String;
}

/// Baseline that never inspects or repairs.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysDegrade;

impl DecisionPolicy for AlwaysDegrade {
    fn decide(&mut self, _ctx: &DecisionContext<'_>) -> ActionKind {
        ActionKind::Degrade
    }

    fn name(&self) -> String {
        "always-degrade".into()
    }
}

/// Replaces an unaffordable action with Degrade. Returns the executed action
/// and whether coercion happened.
pub fn guard_action(
    attempted: ActionKind,
    accrued_cost: u64,
    budget: u64,
    spec: &ComponentSpec,
) -> (ActionKind, bool) {
    if accrued_cost + attempted.cost(spec) > budget {
        (ActionKind::Degrade, attempted != ActionKind::Degrade)
    } else {
        (attempted, false)
    }
}

/// Simulator for one component: spec, decrement kernel and horizon.
#[derive(Debug, Clone)]
pub struct ComponentEnv {
    spec: ComponentSpec,
    kernel: DecayKernel,
    horizon: u32,
}

impl ComponentEnv {
    pub fn new(spec: ComponentSpec, horizon: u32) -> Result<Self, SimError> {
        if horizon < 1 {
            return Err(SimError::Model(ModelError::InvalidParameter(
                "horizon must be >= 1".into(),
            )));
        }
        let kernel = spec.decay_kernel()?;
        Ok(Self {
            spec,
            kernel,
            horizon,
        })
    }

    /// Environment with an explicit decrement distribution instead of the
    /// spec-derived one; the spec still provides prices and the condition
    /// range.
    pub fn with_kernel(
        spec: ComponentSpec,
        kernel: DecayKernel,
        horizon: u32,
    ) -> Result<Self, SimError> {
        if horizon < 1 {
            return Err(SimError::Model(ModelError::InvalidParameter(
                "horizon must be >= 1".into(),
            )));
        }
        spec.validate()?;
        Ok(Self {
            spec,
            kernel,
            horizon,
        })
    }

    pub fn spec(&self) -> &ComponentSpec {
        &self.spec
    }

    pub fn kernel(&self) -> &DecayKernel {
        &self.kernel
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn initial_state(&self, allocated_budget: u64) -> EnvState {
        EnvState {
            condition: self.spec.max_condition,
            accrued_cost: 0,
            step: 0,
            allocated_budget,
        }
    }

    /// Advances the environment by one action.
    ///
    /// Condition 0 is absorbing under every action. Repair restores a live
    /// component to full condition; Degrade and Inspect both apply the
    /// stochastic decrement. The cost ledger always charges the executed
    /// action, and the observation is exact if and only if the action was
    /// Inspect.
    pub fn step(
        &self,
        state: &EnvState,
        action: ActionKind,
        rng: &mut impl Rng,
    ) -> Result<(EnvState, Observation), SimError> {
        if state.step >= self.horizon {
            return Err(SimError::PastHorizon {
                step: state.step,
                horizon: self.horizon,
            });
        }
        let condition = if state.condition == 0 {
            0
        } else {
            match action {
                ActionKind::Repair => self.spec.max_condition,
                ActionKind::Degrade | ActionKind::Inspect => {
                    state.condition.saturating_sub(self.kernel.sample(rng))
                }
            }
        };
        let next = EnvState {
            condition,
            accrued_cost: state.accrued_cost + action.cost(&self.spec),
            step: state.step + 1,
            allocated_budget: state.allocated_budget,
        };
        let obs = match action {
            ActionKind::Inspect => Observation::Exact(condition),
            _ => Observation::None,
        };
        Ok((next, obs))
    }
}

/// Knobs for [`run_episode`].
#[derive(Debug, Clone, Copy)]
pub struct EpisodeOptions {
    pub n_particles: usize,
    pub record_trajectory: bool,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            n_particles: DEFAULT_PARTICLES,
            record_trajectory: false,
        }
    }
}

/// Runs one full-horizon episode under the hard budget guard, maintaining a
/// particle belief for the policy. Returns the episode record; the record's
/// safety tally counts (structurally impossible) invariant violations for
/// harness-level auditing.
pub fn run_episode(
    env: &ComponentEnv,
    budget: u64,
    policy: &mut dyn DecisionPolicy,
    seed: u64,
    opts: &EpisodeOptions,
) -> Result<EpisodeRecord, SimError> {
    let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xe1]));
    let mut belief_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xbe]));
    policy.reset(derive_seed(seed, &[0xac]));

    let mut state = env.initial_state(budget);
    let mut belief = belief::init_belief(&env.spec, opts.n_particles);
    let mut record = EpisodeRecord {
        component_id: env.spec.id.clone(),
        seed,
        budget,
        policy_name: policy.name(),
        survival_time: env.horizon,
        total_cost: 0,
        repairs: 0,
        inspections: 0,
        coerced_actions: 0,
        safety: SafetyTally::default(),
        trajectory: opts.record_trajectory.then(Vec::new),
    };
    let mut died = false;

    for _ in 0..env.horizon {
        let ctx = DecisionContext {
            spec: &env.spec,
            step: state.step,
            horizon: env.horizon,
            belief_mean: belief.mean(),
            belief_variance: belief.variance(),
            accrued_cost: state.accrued_cost,
            allocated_budget: budget,
            true_condition: state.condition,
        };
        let attempted = policy.decide(&ctx);
        let (executed, coerced) = guard_action(attempted, state.accrued_cost, budget, &env.spec);
        if coerced {
            record.coerced_actions += 1;
        }

        let (next, obs) = env.step(&state, executed, &mut env_rng)?;
        belief = belief::predict(&belief, executed, &env.kernel, &env.spec, &mut belief_rng);
        belief = belief::correct(&belief, &obs);

        match executed {
            ActionKind::Repair => record.repairs += 1,
            ActionKind::Inspect => record.inspections += 1,
            ActionKind::Degrade => {}
        }
        if let Some(traj) = record.trajectory.as_mut() {
            traj.push(TrajectoryStep {
                step: next.step,
                condition: next.condition,
                action: executed,
                accrued_cost: next.accrued_cost,
            });
        }
        if next.accrued_cost > budget {
            record.safety.cost_violations += 1;
        }
        if executed != ActionKind::Repair
            && state.condition > 0
            && next.condition > state.condition
        {
            record.safety.monotonicity_violations += 1;
        }
        if !died && next.condition == 0 {
            record.survival_time = next.step;
            died = true;
        }
        state = next;
    }

    record.total_cost = state.accrued_cost;
    debug_assert_eq!(
        record.total_cost,
        u64::from(record.repairs) * env.spec.repair_cost
            + u64::from(record.inspections) * env.spec.inspect_cost
    );
    Ok(record)
}

/// Writes episode records as CSV with the columns
/// `component_id, seed, budget, policy_name, survival_time, total_cost,
/// repairs, inspections`.
pub fn write_episode_csv(path: &std::path::Path, records: &[EpisodeRecord]) -> Result<(), SimError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "component_id",
        "seed",
        "budget",
        "policy_name",
        "survival_time",
        "total_cost",
        "repairs",
        "inspections",
    ])?;
    for r in records {
        writer.write_record([
            r.component_id.as_str(),
            &r.seed.to_string(),
            &r.budget.to_string(),
            r.policy_name.as_str(),
            &r.survival_time.to_string(),
            &r.total_cost.to_string(),
            &r.repairs.to_string(),
            &r.inspections.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
