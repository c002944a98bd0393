//! Learned inspection policies and the baselines they are compared against.
//!
//! The guided agent reduces the control problem to "inspect or not": a small
//! policy network looks at the belief features, the cost ledger and the
//! component context, and either inspects (buying an exact reading) or
//! defers, in which case the action comes from the oracle policy evaluated
//! at the belief point estimate. The vanilla ablation is the same network
//! with a three-way head over the full action space and no oracle. The
//! periodic-inspection heuristic inspects on a fixed interval and repairs
//! below a belief threshold.

pub mod net;
mod ppo;

pub use net::{Adam, NetShape, PolicyParameters};
pub use ppo::{
    collect_frozen_minibatch, load_checkpoint, save_checkpoint, surrogate_loss_and_grad,
    train_meta_ppo, CheckpointMeta, Minibatch, PpoHyper, TrainingLog, TrainingLogRow,
    CHECKPOINT_SCHEMA,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActionKind, ModelError};
use crate::oracle::{OracleError, OraclePolicy};
use crate::sim::{DecisionContext, DecisionPolicy, SimError};

/// Action head size of the guided agent: `{Inspect, Defer}`.
pub const GUIDED_ACTIONS: usize = 2;
/// Action head size of the vanilla ablation: `{Degrade, Inspect, Repair}`.
pub const VANILLA_ACTIONS: usize = 3;
/// Feature vector length fed to either network.
pub const OBS_DIM: usize = 9;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("model corruption: non-finite policy logits")]
    NonFiniteLogits,
    #[error("training diverged at update {update}: {detail}")]
    Divergence { update: usize, detail: String },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint encoding: {0}")]
    Json(#[from] serde_json::Error),
}

/// The guided agent's binary choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuidedChoice {
    Inspect,
    Defer,
}

/// Action selection mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    /// Draw from the softmax of the logits.
    Sample,
    /// Argmax; ties go to Defer (guided) or Degrade (vanilla).
    Greedy,
}

/// Fixed normalization constants for the observation features. One set is
/// chosen per experiment and recorded with the checkpoint so observations
/// are reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub weibull_shape: f64,
    pub weibull_scale: f64,
    pub repair_cost: f64,
    pub inspect_cost: f64,
    pub budget: f64,
}

impl Default for FeatureScale {
    fn default() -> Self {
        Self {
            weibull_shape: 4.0,
            weibull_scale: 200.0,
            repair_cost: 500.0,
            inspect_cost: 5.0,
            budget: 5000.0,
        }
    }
}

/// What a learned policy sees each step: belief moments, ledger and clock
/// fractions, and normalized component context so one meta-trained network
/// can serve every (component, budget) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentObservation {
    pub belief_mean: f64,
    pub belief_variance: f64,
    pub cost_fraction: f64,
    pub step_fraction: f64,
    pub context: [f64; 5],
}

impl AgentObservation {
    pub fn from_context(ctx: &DecisionContext<'_>, scale: &FeatureScale) -> Self {
        let max_c = f64::from(ctx.spec.max_condition);
        Self {
            belief_mean: ctx.belief_mean / max_c,
            belief_variance: ctx.belief_variance / (max_c * max_c),
            cost_fraction: if ctx.allocated_budget == 0 {
                1.0
            } else {
                ctx.accrued_cost as f64 / ctx.allocated_budget as f64
            },
            step_fraction: f64::from(ctx.step) / f64::from(ctx.horizon),
            context: [
                ctx.spec.weibull_shape / scale.weibull_shape,
                ctx.spec.weibull_scale / scale.weibull_scale,
                ctx.spec.repair_cost as f64 / scale.repair_cost,
                ctx.spec.inspect_cost as f64 / scale.inspect_cost,
                ctx.allocated_budget as f64 / scale.budget,
            ],
        }
    }

    pub fn features(&self) -> [f64; OBS_DIM] {
        [
            self.belief_mean,
            self.belief_variance,
            self.cost_fraction,
            self.step_fraction,
            self.context[0],
            self.context[1],
            self.context[2],
            self.context[3],
            self.context[4],
        ]
    }
}

/// Reward constants. `r1` punishes attempted budget overshoot, `r2` punishes
/// a (believed) dead component, and the running term pays `step/horizon`
/// minus `alpha` times the belief error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            r1: -100.0,
            r2: -10.0,
            alpha: 1e-3,
        }
    }
}

impl RewardConfig {
    /// Checks `|r1| > |r2| > max attainable |r3|`, with
    /// `r3 in [-alpha * max_condition, 1]`, and `0 < alpha < 1`.
    pub fn validate(&self, max_condition: u32) -> Result<(), AgentError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AgentError::BadConfig(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.r1 < 0.0 && self.r2 < 0.0) {
            return Err(AgentError::BadConfig(
                "r1 and r2 must both be negative".into(),
            ));
        }
        let max_r3 = 1f64.max(self.alpha * f64::from(max_condition));
        if !(self.r1.abs() > self.r2.abs() && self.r2.abs() > max_r3) {
            return Err(AgentError::BadConfig(format!(
                "need |r1| > |r2| > {max_r3} (max attainable |r3|), got r1={}, r2={}",
                self.r1, self.r2
            )));
        }
        Ok(())
    }
}

/// Step reward. Overshooting the budget dominates everything; a dead
/// component — actually dead or believed dead — dominates the running term;
/// otherwise the agent earns the elapsed-time fraction minus `alpha` times
/// its belief error.
///
/// The death branch fires on the true condition as well as the belief floor:
/// the time bonus exists for keeping the component alive, and paying it to a
/// dead component whose belief has not caught up would reward not looking.
/// With it, better information can only help, which is what makes learned
/// inspection worthwhile.
pub fn reward(
    condition: u32,
    belief_mean: f64,
    accrued_cost: u64,
    budget: u64,
    step: u32,
    horizon: u32,
    cfg: &RewardConfig,
) -> f64 {
    if accrued_cost > budget {
        cfg.r1
    } else if condition == 0 || belief_mean.floor() == 0.0 {
        cfg.r2
    } else {
        f64::from(step) / f64::from(horizon)
            - cfg.alpha * (belief_mean - f64::from(condition)).abs()
    }
}

fn finite_logits(logits: &[f64]) -> Result<(), AgentError> {
    if logits.iter().all(|l| l.is_finite()) {
        Ok(())
    } else {
        Err(AgentError::NonFiniteLogits)
    }
}

/// Samples an index from the softmax of `logits`.
fn sample_softmax(logits: &[f64], rng: &mut impl Rng) -> usize {
    let ls = net::log_softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, l) in ls.iter().enumerate() {
        acc += l.exp();
        if u < acc {
            return i;
        }
    }
    ls.len() - 1
}

/// The guided agent's inspect-or-defer decision.
///
/// `Sample` draws from the softmax of the two logits; `Greedy` takes the
/// argmax with ties resolved toward Defer.
pub fn act(
    params: &PolicyParameters,
    obs: &AgentObservation,
    mode: ActMode,
    rng: &mut impl Rng,
) -> Result<GuidedChoice, AgentError> {
    let fwd = net::forward(params, &obs.features());
    finite_logits(&fwd.logits)?;
    let idx = match mode {
        ActMode::Sample => sample_softmax(&fwd.logits, rng),
        ActMode::Greedy => usize::from(fwd.logits[0] <= fwd.logits[1]),
    };
    Ok(if idx == 0 {
        GuidedChoice::Inspect
    } else {
        GuidedChoice::Defer
    })
}

/// Vanilla three-way action choice over `{Degrade, Inspect, Repair}`; greedy
/// ties resolve toward the first (cheapest) maximum.
pub fn act_vanilla(
    params: &PolicyParameters,
    obs: &AgentObservation,
    mode: ActMode,
    rng: &mut impl Rng,
) -> Result<ActionKind, AgentError> {
    let fwd = net::forward(params, &obs.features());
    finite_logits(&fwd.logits)?;
    let idx = match mode {
        ActMode::Sample => sample_softmax(&fwd.logits, rng),
        ActMode::Greedy => {
            let mut best = 0;
            for (i, &l) in fwd.logits.iter().enumerate() {
                if l > fwd.logits[best] {
                    best = i;
                }
            }
            best
        }
    };
    Ok(vanilla_action(idx))
}

pub(crate) fn vanilla_action(idx: usize) -> ActionKind {
    match idx {
        0 => ActionKind::Degrade,
        1 => ActionKind::Inspect,
        _ => ActionKind::Repair,
    }
}

/// Turns the agent's binary choice into an environment action: Inspect is
/// passed through, Defer asks the oracle at the belief point estimate
/// (rounded to the nearest condition level).
pub fn compose_action(
    agent_choice: GuidedChoice,
    oracle: &OraclePolicy,
    step: u32,
    belief_mean: f64,
    accrued_cost: u64,
) -> ActionKind {
    match agent_choice {
        GuidedChoice::Inspect => ActionKind::Inspect,
        GuidedChoice::Defer => {
            let condition = belief_mean
                .round()
                .clamp(0.0, f64::from(oracle.max_condition())) as u32;
            oracle.action_lenient(step, condition, accrued_cost)
        }
    }
}

/// Periodic-inspection baseline: inspect every `interval` steps, repair when
/// the belief mean falls below `threshold` (if affordable), otherwise do
/// nothing.
#[derive(Debug, Clone, Copy)]
pub struct HeuristicPolicy {
    pub interval: u32,
    pub threshold: u32,
}

/// Builds the periodic-inspection decision procedure.
pub fn heuristic_policy(interval: u32, threshold: u32) -> Result<HeuristicPolicy, AgentError> {
    if interval < 1 {
        return Err(AgentError::BadConfig("interval must be >= 1".into()));
    }
    Ok(HeuristicPolicy {
        interval,
        threshold,
    })
}

impl DecisionPolicy for HeuristicPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ActionKind {
        if ctx.step % self.interval == 0 {
            ActionKind::Inspect
        } else if ctx.belief_mean < f64::from(self.threshold)
            && ctx.accrued_cost + ctx.spec.repair_cost <= ctx.allocated_budget
        {
            ActionKind::Repair
        } else {
            ActionKind::Degrade
        }
    }

    fn name(&self) -> String {
        format!("heuristic-{}-{}", self.interval, self.threshold)
    }
}

/// Oracle-guided agent as an episode decision procedure.
#[derive(Debug, Clone)]
pub struct GuidedDecision<'a> {
    params: &'a PolicyParameters,
    oracle: &'a OraclePolicy,
    mode: ActMode,
    scale: FeatureScale,
    rng: ChaCha8Rng,
}

impl<'a> GuidedDecision<'a> {
    pub fn new(params: &'a PolicyParameters, oracle: &'a OraclePolicy, mode: ActMode) -> Self {
        Self {
            params,
            oracle,
            mode,
            scale: FeatureScale::default(),
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn with_scale(mut self, scale: FeatureScale) -> Self {
        self.scale = scale;
        self
    }
}

impl DecisionPolicy for GuidedDecision<'_> {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ActionKind {
        let obs = AgentObservation::from_context(ctx, &self.scale);
        let choice =
            act(self.params, &obs, self.mode, &mut self.rng).expect("finite policy logits");
        compose_action(
            choice,
            self.oracle,
            ctx.step,
            ctx.belief_mean,
            ctx.accrued_cost,
        )
    }

    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn name(&self) -> String {
        "guided-ppo".into()
    }
}

/// Vanilla meta-PPO ablation as an episode decision procedure.
#[derive(Debug, Clone)]
pub struct VanillaDecision<'a> {
    params: &'a PolicyParameters,
    mode: ActMode,
    scale: FeatureScale,
    rng: ChaCha8Rng,
}

impl<'a> VanillaDecision<'a> {
    pub fn new(params: &'a PolicyParameters, mode: ActMode) -> Self {
        Self {
            params,
            mode,
            scale: FeatureScale::default(),
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn with_scale(mut self, scale: FeatureScale) -> Self {
        self.scale = scale;
        self
    }
}

impl DecisionPolicy for VanillaDecision<'_> {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ActionKind {
        let obs = AgentObservation::from_context(ctx, &self.scale);
        act_vanilla(self.params, &obs, self.mode, &mut self.rng).expect("finite policy logits")
    }

    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn name(&self) -> String {
        "vanilla-ppo".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ComponentSpec;
    use crate::oracle::{build_oracle, OracleLimits};

    fn spec() -> ComponentSpec {
        ComponentSpec::new("a0", 1.5, 40.0, 100, 2).unwrap()
    }

    #[test]
    fn reward_cases() {
        let cfg = RewardConfig::default();
        // Attempted overshoot dominates.
        assert_eq!(reward(50, 60.0, 501, 500, 10, 100, &cfg), cfg.r1);
        // Believed-dead component.
        assert_eq!(reward(50, 0.7, 100, 500, 10, 100, &cfg), cfg.r2);
        // Running reward: exact value at mid-horizon with perfect belief.
        let r = reward(60, 60.0, 100, 500, 50, 100, &cfg);
        assert_eq!(r, 0.5);
        // Belief error is penalized.
        let r_err = reward(60, 70.0, 100, 500, 50, 100, &cfg);
        assert!((r_err - (0.5 - 1e-3 * 10.0)).abs() < 1e-12);
    }

    #[test]
    fn reward_config_ordering_is_enforced() {
        assert!(RewardConfig::default().validate(100).is_ok());
        let bad = RewardConfig {
            r1: -0.5,
            r2: -10.0,
            alpha: 1e-3,
        };
        assert!(bad.validate(100).is_err());
        let bad_alpha = RewardConfig {
            alpha: 1.5,
            ..RewardConfig::default()
        };
        assert!(bad_alpha.validate(100).is_err());
    }

    /// Interval check of the invariant `r1 < r2 < min attainable r3`.
    #[test]
    fn reward_bands_never_overlap() {
        let cfg = RewardConfig::default();
        cfg.validate(100).unwrap();
        let min_r3 = 0.0 - cfg.alpha * 100.0;
        assert!(cfg.r1 < cfg.r2 && cfg.r2 < min_r3);
    }

    fn obs_with(params_seed: u64) -> (PolicyParameters, AgentObservation) {
        let params = PolicyParameters::init(
            NetShape {
                input: OBS_DIM,
                hidden: 16,
                actions: GUIDED_ACTIONS,
            },
            params_seed,
        );
        let obs = AgentObservation {
            belief_mean: 0.6,
            belief_variance: 0.01,
            cost_fraction: 0.2,
            step_fraction: 0.5,
            context: [0.4, 0.3, 0.2, 0.6, 0.1],
        };
        (params, obs)
    }

    #[test]
    fn act_saturates_and_breaks_ties_to_defer() {
        let (mut params, obs) = obs_with(1);
        // Zero the policy-head weights and drive the decision with biases.
        let n = params.theta.len();
        let b3_start = n - (16 + 1) - GUIDED_ACTIONS;
        let w3_start = b3_start - GUIDED_ACTIONS * 16;
        for w in &mut params.theta[w3_start..b3_start] {
            *w = 0.0;
        }
        params.theta[b3_start] = 10.0;
        params.theta[b3_start + 1] = -10.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut inspects = 0;
        for _ in 0..2000 {
            if act(&params, &obs, ActMode::Sample, &mut rng).unwrap() == GuidedChoice::Inspect {
                inspects += 1;
            }
        }
        assert!(inspects >= 1998, "inspects {inspects}");
        assert_eq!(
            act(&params, &obs, ActMode::Greedy, &mut rng).unwrap(),
            GuidedChoice::Inspect
        );

        // Exact tie -> Defer.
        params.theta[b3_start] = 0.0;
        params.theta[b3_start + 1] = 0.0;
        assert_eq!(
            act(&params, &obs, ActMode::Greedy, &mut rng).unwrap(),
            GuidedChoice::Defer
        );
    }

    #[test]
    fn act_is_deterministic_for_fixed_seed() {
        let (params, obs) = obs_with(2);
        let mut a_rng = ChaCha8Rng::seed_from_u64(9);
        let mut b_rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert_eq!(
                act(&params, &obs, ActMode::Sample, &mut a_rng).unwrap(),
                act(&params, &obs, ActMode::Sample, &mut b_rng).unwrap()
            );
        }
    }

    #[test]
    fn act_rejects_non_finite_logits() {
        let (mut params, obs) = obs_with(3);
        params.theta[0] = f64::NAN;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            act(&params, &obs, ActMode::Sample, &mut rng),
            Err(AgentError::NonFiniteLogits)
        ));
    }

    #[test]
    fn compose_inspect_passes_through() {
        let s = spec();
        let oracle = build_oracle(&s, 500, 50, &OracleLimits::default()).unwrap();
        assert_eq!(
            compose_action(GuidedChoice::Inspect, &oracle, 3, 80.0, 0),
            ActionKind::Inspect
        );
    }

    #[test]
    fn compose_defer_consults_oracle_table() {
        let s = spec();
        let oracle = build_oracle(&s, 500, 50, &OracleLimits::default()).unwrap();
        // Fresh full-condition component: the oracle never repairs at the top.
        assert_eq!(
            compose_action(GuidedChoice::Defer, &oracle, 0, 100.0, 0),
            ActionKind::Degrade
        );
        // Find a repairing cell and check the composed action matches it.
        let mut checked = false;
        'outer: for step in 0..50 {
            for condition in 1..=100u32 {
                if oracle.action_by_repairs(step, condition, 0) == ActionKind::Repair {
                    let composed =
                        compose_action(GuidedChoice::Defer, &oracle, step, f64::from(condition), 0);
                    assert_eq!(composed, ActionKind::Repair);
                    checked = true;
                    break 'outer;
                }
            }
        }
        assert!(checked, "oracle never repairs on this spec/budget");
    }

    #[test]
    fn heuristic_schedule_and_threshold() {
        let s = spec();
        let mut policy = heuristic_policy(5, 15).unwrap();
        let ctx = |step: u32, belief: f64| DecisionContext {
            spec: &s,
            step,
            horizon: 100,
            belief_mean: belief,
            belief_variance: 0.0,
            accrued_cost: 0,
            allocated_budget: 1000,
            true_condition: belief as u32,
        };
        assert_eq!(policy.decide(&ctx(0, 100.0)), ActionKind::Inspect);
        assert_eq!(policy.decide(&ctx(5, 100.0)), ActionKind::Inspect);
        assert_eq!(policy.decide(&ctx(3, 100.0)), ActionKind::Degrade);
        assert_eq!(policy.decide(&ctx(3, 10.0)), ActionKind::Repair);
        // Unaffordable repair falls back to Degrade.
        let broke = DecisionContext {
            accrued_cost: 950,
            ..ctx(3, 10.0)
        };
        assert_eq!(policy.decide(&broke), ActionKind::Degrade);
        // Zero threshold never repairs.
        let mut never = heuristic_policy(5, 0).unwrap();
        assert_eq!(never.decide(&ctx(3, 0.0)), ActionKind::Degrade);
        assert!(heuristic_policy(0, 15).is_err());
    }
}
