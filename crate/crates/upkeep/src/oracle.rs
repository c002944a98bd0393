//! Exact finite-horizon value iteration for the fully observable companion
//! problem, producing the oracle policy used both as an upper-bound
//! comparator and as the fallback action source for the guided agent.
//!
//! The companion MDP removes the observation channel: the action space is
//! `{Degrade, Repair}`, the transition law is identical to the simulator's,
//! and the true condition is visible. Reward is 1 per step the component
//! stays above condition 0, so the value function is the expected remaining
//! survival time.
//!
//! Only Repair costs money in this MDP, so the accrued cost takes at most
//! `floor(budget / repair_cost) + 1` distinct values and the cost axis
//! collapses to a repairs-used index — the tables stay tiny and exact, with
//! no cost rounding anywhere. Queries that arrive with a raw cost ledger are
//! bucketed by the number of still-affordable repairs, which is the only
//! budget quantity the future depends on.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{ActionKind, ComponentSpec, DecayKernel, ModelError};
use crate::sim::{DecisionContext, DecisionPolicy};

const CACHE_MAGIC: &[u8; 4] = b"UPKO";
const CACHE_VERSION: u32 = 1;

/// Default ceiling on `(horizon+1) * (conditions) * (repair levels)` cells.
pub const DEFAULT_CELL_CAP: usize = 50_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle table would need {cells} cells, cap is {cap}")]
    StateSpaceCap { cells: usize, cap: usize },
    #[error("index out of range: step {step}, condition {condition}, cost {accrued_cost}")]
    IndexOutOfRange {
        step: u32,
        condition: u32,
        accrued_cost: u64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("oracle cache i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("oracle cache corrupt: {0}")]
    CacheCorrupt(String),
}

/// Resource limits for table construction.
#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    pub max_cells: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_cells: DEFAULT_CELL_CAP,
        }
    }
}

/// Value and argmax tables over `(step, condition, repairs used)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePolicy {
    spec_hash: u64,
    budget: u64,
    horizon: u32,
    max_condition: u32,
    repair_cost: u64,
    /// Highest repairs-used index in the table; repairing is affordable at
    /// index `r` iff `r < max_repairs`.
    max_repairs: u32,
    /// Expected remaining survival steps, `(horizon+1) * (S+1) * (R+1)`.
    values: Vec<f64>,
    /// 0 = Degrade, 1 = Repair, same indexing minus the terminal row.
    actions: Vec<u8>,
}

impl OraclePolicy {
    #[inline]
    fn idx(&self, step: u32, condition: u32, repairs: u32) -> usize {
        ((step as usize * (self.max_condition as usize + 1)) + condition as usize)
            * (self.max_repairs as usize + 1)
            + repairs as usize
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn max_condition(&self) -> u32 {
        self.max_condition
    }

    pub fn max_repairs(&self) -> u32 {
        self.max_repairs
    }

    pub fn spec_hash(&self) -> u64 {
        self.spec_hash
    }

    /// Value table lookup by repairs-used index.
    pub fn value_by_repairs(&self, step: u32, condition: u32, repairs: u32) -> f64 {
        self.values[self.idx(step, condition, repairs)]
    }

    /// Argmax table lookup by repairs-used index.
    pub fn action_by_repairs(&self, step: u32, condition: u32, repairs: u32) -> ActionKind {
        if self.actions[self.idx(step, condition, repairs)] == 1 {
            ActionKind::Repair
        } else {
            ActionKind::Degrade
        }
    }

    /// Converts a raw cost ledger into the repairs-used bucket with the same
    /// number of still-affordable repairs. Exact for pure-repair ledgers and
    /// conservative for ledgers that also carry inspection costs.
    fn repairs_bucket(&self, accrued_cost: u64) -> u32 {
        let remaining = self.budget.saturating_sub(accrued_cost);
        let affordable = (remaining / self.repair_cost) as u32;
        self.max_repairs - affordable.min(self.max_repairs)
    }

    /// Oracle action for a live query.
    pub fn action(
        &self,
        step: u32,
        condition: u32,
        accrued_cost: u64,
    ) -> Result<ActionKind, OracleError> {
        self.check_range(step, condition, accrued_cost)?;
        Ok(self.action_by_repairs(step, condition, self.repairs_bucket(accrued_cost)))
    }

    /// Total-function variant of [`OraclePolicy::action`]: indices are
    /// clamped into range instead of erroring, and queries at or past the
    /// horizon answer Degrade. Used where a decision is required no matter
    /// what the (possibly estimated) inputs look like.
    pub fn action_lenient(&self, step: u32, condition: u32, accrued_cost: u64) -> ActionKind {
        if step >= self.horizon {
            return ActionKind::Degrade;
        }
        let condition = condition.min(self.max_condition);
        self.action_by_repairs(step, condition, self.repairs_bucket(accrued_cost))
    }

    /// Expected remaining survival for a live query.
    pub fn value(
        &self,
        step: u32,
        condition: u32,
        accrued_cost: u64,
    ) -> Result<f64, OracleError> {
        if step > self.horizon || condition > self.max_condition || accrued_cost > self.budget {
            return Err(OracleError::IndexOutOfRange {
                step,
                condition,
                accrued_cost,
            });
        }
        Ok(self.value_by_repairs(step, condition, self.repairs_bucket(accrued_cost)))
    }

    fn check_range(&self, step: u32, condition: u32, accrued_cost: u64) -> Result<(), OracleError> {
        if step >= self.horizon || condition > self.max_condition || accrued_cost > self.budget {
            return Err(OracleError::IndexOutOfRange {
                step,
                condition,
                accrued_cost,
            });
        }
        Ok(())
    }

    /// Serializes the tables to a little-endian binary cache file.
    pub fn save(&self, path: &Path) -> Result<(), OracleError> {
        let mut out = Vec::with_capacity(64 + self.values.len() * 8 + self.actions.len());
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.spec_hash.to_le_bytes());
        out.extend_from_slice(&self.budget.to_le_bytes());
        out.extend_from_slice(&self.horizon.to_le_bytes());
        out.extend_from_slice(&self.max_condition.to_le_bytes());
        out.extend_from_slice(&self.repair_cost.to_le_bytes());
        out.extend_from_slice(&self.max_repairs.to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.actions.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.actions);
        let mut file = std::fs::File::create(path)?;
        file.write_all(&out)?;
        Ok(())
    }

    /// Loads a table written by [`OraclePolicy::save`].
    pub fn load(path: &Path) -> Result<Self, OracleError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cursor = 0usize;
        let mut take = |n: usize| -> Result<&[u8], OracleError> {
            if cursor + n > bytes.len() {
                return Err(OracleError::CacheCorrupt("truncated file".into()));
            }
            let slice = &bytes[cursor..cursor + n];
            cursor += n;
            Ok(slice)
        };
        if take(4)? != CACHE_MAGIC {
            return Err(OracleError::CacheCorrupt("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(OracleError::CacheCorrupt(format!(
                "unsupported version {version}"
            )));
        }
        let spec_hash = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let budget = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let horizon = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let max_condition = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let repair_cost = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let max_repairs = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let n_values = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let expected =
            (horizon as usize + 1) * (max_condition as usize + 1) * (max_repairs as usize + 1);
        if n_values != expected {
            return Err(OracleError::CacheCorrupt(format!(
                "value table length {n_values}, expected {expected}"
            )));
        }
        let mut values = Vec::with_capacity(n_values);
        for _ in 0..n_values {
            values.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        let n_actions = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        if n_actions != expected {
            return Err(OracleError::CacheCorrupt(format!(
                "action table length {n_actions}, expected {expected}"
            )));
        }
        let actions = take(n_actions)?.to_vec();
        Ok(Self {
            spec_hash,
            budget,
            horizon,
            max_condition,
            repair_cost,
            max_repairs,
            values,
            actions,
        })
    }

    /// Cache file name keyed by `(spec hash, budget, horizon)`.
    pub fn cache_path(dir: &Path, spec: &ComponentSpec, budget: u64, horizon: u32) -> PathBuf {
        dir.join(format!(
            "{:016x}-{budget}-{horizon}.oracle",
            spec.content_hash()
        ))
    }

    /// Loads the cached table for `(spec, budget, horizon)` or builds and
    /// stores it.
    pub fn cached_or_build(
        dir: &Path,
        spec: &ComponentSpec,
        budget: u64,
        horizon: u32,
        limits: &OracleLimits,
    ) -> Result<Self, OracleError> {
        let path = Self::cache_path(dir, spec, budget, horizon);
        if path.exists() {
            if let Ok(policy) = Self::load(&path) {
                if policy.spec_hash == spec.content_hash()
                    && policy.budget == budget
                    && policy.horizon == horizon
                {
                    return Ok(policy);
                }
            }
        }
        let policy = build_oracle(spec, budget, horizon, limits)?;
        std::fs::create_dir_all(dir)?;
        policy.save(&path)?;
        Ok(policy)
    }
}

/// Backward induction over `(step, condition, repairs used)` for a component
/// spec; the decrement kernel is derived from the spec's Weibull parameters.
pub fn build_oracle(
    spec: &ComponentSpec,
    budget: u64,
    horizon: u32,
    limits: &OracleLimits,
) -> Result<OraclePolicy, OracleError> {
    let kernel = spec.decay_kernel()?;
    build_oracle_from_kernel(
        &kernel,
        spec.max_condition,
        spec.repair_cost,
        budget,
        horizon,
        limits,
        spec.content_hash(),
    )
}

/// Backward induction on an explicit decrement kernel.
///
/// Reward is 1 for every transition that lands above condition 0. Repair is
/// available while another `repair_cost` fits in the budget and restores the
/// condition deterministically to the maximum; ties break toward Degrade.
#[allow(clippy::too_many_arguments)]
pub fn build_oracle_from_kernel(
    kernel: &DecayKernel,
    max_condition: u32,
    repair_cost: u64,
    budget: u64,
    horizon: u32,
    limits: &OracleLimits,
    spec_hash: u64,
) -> Result<OraclePolicy, OracleError> {
    if horizon < 1 {
        return Err(OracleError::Model(ModelError::InvalidParameter(
            "horizon must be >= 1".into(),
        )));
    }
    if repair_cost < 1 {
        return Err(OracleError::Model(ModelError::InvalidParameter(
            "repair_cost must be >= 1".into(),
        )));
    }
    // More repairs than steps can never execute, so the table caps there.
    let max_repairs = ((budget / repair_cost) as u32).min(horizon);
    let s_levels = max_condition as usize + 1;
    let r_levels = max_repairs as usize + 1;
    let cells = (horizon as usize + 1) * s_levels * r_levels;
    if cells > limits.max_cells {
        return Err(OracleError::StateSpaceCap {
            cells,
            cap: limits.max_cells,
        });
    }

    let mut policy = OraclePolicy {
        spec_hash,
        budget,
        horizon,
        max_condition,
        repair_cost,
        max_repairs,
        values: vec![0.0; cells],
        actions: vec![0; cells],
    };
    let probs = kernel.probs();

    for step in (0..horizon).rev() {
        for condition in 1..=max_condition {
            for repairs in 0..=max_repairs {
                // Degrade: survive iff the decrement stays below the
                // condition; dead transitions contribute nothing.
                let mut q_degrade = 0.0;
                for (d, &p) in probs.iter().enumerate().take(condition as usize) {
                    if p > 0.0 {
                        let next = condition - d as u32;
                        q_degrade +=
                            p * (1.0 + policy.values[policy.idx(step + 1, next, repairs)]);
                    }
                }
                let repair_available = repairs < max_repairs;
                let cell = policy.idx(step, condition, repairs);
                if repair_available {
                    let q_repair =
                        1.0 + policy.values[policy.idx(step + 1, max_condition, repairs + 1)];
                    if q_repair > q_degrade {
                        policy.values[cell] = q_repair;
                        policy.actions[cell] = 1;
                        continue;
                    }
                }
                policy.values[cell] = q_degrade;
                policy.actions[cell] = 0;
            }
        }
    }
    Ok(policy)
}

/// Full-observability comparator: drives the simulator straight from the
/// oracle tables using the true condition.
#[derive(Debug, Clone)]
pub struct OracleDecision<'a> {
    policy: &'a OraclePolicy,
}

impl<'a> OracleDecision<'a> {
    pub fn new(policy: &'a OraclePolicy) -> Self {
        Self { policy }
    }
}

impl DecisionPolicy for OracleDecision<'_> {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> ActionKind {
        self.policy
            .action(ctx.step, ctx.true_condition, ctx.accrued_cost)
            .unwrap_or(ActionKind::Degrade)
    }

    fn name(&self) -> String {
        "oracle".into()
    }
}
