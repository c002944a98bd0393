//! Domain types shared by every other module: component specifications,
//! actions, fleets, budget allocations, and the per-step deterioration
//! kernel derived from a component's Weibull parameters.
//!
//! A component's health is an integer condition index on `[0, max_condition]`
//! (100 by default). Condition 0 is an absorbing failure state. Under the
//! non-restorative actions the condition decreases by a random integer
//! decrement each step; the decrement distribution is obtained by quantizing
//! a Weibull law whose scale is calibrated so that the expected unrepaired
//! lifetime is roughly `weibull_scale` steps.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::{derive_seed, fnv1a64};

/// Default maximum condition index.
pub const DEFAULT_MAX_CONDITION: u32 = 100;

/// Schema tag written at the top of fleet files.
pub const FLEET_SCHEMA: &str = "fleet/1";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid range: low {low} exceeds high {high}")]
    InvalidRange { low: f64, high: f64 },
    #[error("deterioration kernel never decrements; absorption is unreachable")]
    NoDecay,
    #[error("fleet schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("duplicate component id: {0}")]
    DuplicateId(String),
    #[error("fleet i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("fleet encoding: {0}")]
    Json(#[from] serde_json::Error),
}

/// One maintainable component: deterioration law, action prices, identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub id: String,
    /// Weibull shape parameter of the deterioration law (> 0).
    pub weibull_shape: f64,
    /// Weibull scale parameter, in time steps; roughly the expected
    /// unrepaired lifetime (> 0).
    pub weibull_scale: f64,
    /// Price of a repair, in integer budget units (>= 1).
    pub repair_cost: u64,
    /// Price of an inspection, in integer budget units (>= 1, <= repair).
    pub inspect_cost: u64,
    /// Maximum condition index (>= 1). 100 unless overridden.
    pub max_condition: u32,
}

impl ComponentSpec {
    pub fn new(
        id: impl Into<String>,
        weibull_shape: f64,
        weibull_scale: f64,
        repair_cost: u64,
        inspect_cost: u64,
    ) -> Result<Self, ModelError> {
        let spec = Self {
            id: id.into(),
            weibull_shape,
            weibull_scale,
            repair_cost,
            inspect_cost,
            max_condition: DEFAULT_MAX_CONDITION,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_max_condition(mut self, max_condition: u32) -> Result<Self, ModelError> {
        self.max_condition = max_condition;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.weibull_shape > 0.0) || !self.weibull_shape.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "weibull_shape must be positive and finite, got {}",
                self.weibull_shape
            )));
        }
        if !(self.weibull_scale > 0.0) || !self.weibull_scale.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "weibull_scale must be positive and finite, got {}",
                self.weibull_scale
            )));
        }
        if self.repair_cost < 1 {
            return Err(ModelError::InvalidParameter(
                "repair_cost must be >= 1".into(),
            ));
        }
        if self.inspect_cost < 1 || self.inspect_cost > self.repair_cost {
            return Err(ModelError::InvalidParameter(format!(
                "inspect_cost must be in [1, repair_cost], got {} with repair_cost {}",
                self.inspect_cost, self.repair_cost
            )));
        }
        if self.max_condition < 1 {
            return Err(ModelError::InvalidParameter(
                "max_condition must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Per-step decrement distribution implied by the Weibull parameters.
    pub fn decay_kernel(&self) -> Result<DecayKernel, ModelError> {
        DecayKernel::from_spec(self)
    }

    /// Stable content hash of the fields that define the component's
    /// dynamics and prices; used to key oracle cache files.
    pub fn content_hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(64);
        bytes.extend_from_slice(self.id.as_bytes());
        bytes.push(0);
        bytes.extend_from_slice(&self.weibull_shape.to_le_bytes());
        bytes.extend_from_slice(&self.weibull_scale.to_le_bytes());
        bytes.extend_from_slice(&self.repair_cost.to_le_bytes());
        bytes.extend_from_slice(&self.inspect_cost.to_le_bytes());
        bytes.extend_from_slice(&self.max_condition.to_le_bytes());
        fnv1a64(&bytes)
    }
}

/// The three per-component actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    /// Do nothing; the component keeps deteriorating. Costs 0.
    Degrade,
    /// Observe the true condition; the component still deteriorates.
    Inspect,
    /// Restore the condition to `max_condition`.
    Repair,
}

impl ActionKind {
    pub fn cost(self, spec: &ComponentSpec) -> u64 {
        match self {
            ActionKind::Degrade => 0,
            ActionKind::Inspect => spec.inspect_cost,
            ActionKind::Repair => spec.repair_cost,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Degrade => "degrade",
            ActionKind::Inspect => "inspect",
            ActionKind::Repair => "repair",
        }
    }
}

/// Integer distribution of the per-step condition decrement.
///
/// `probs[d]` is the probability that the condition drops by `d` this step,
/// for `d` in `0..=max_condition`; drops past the failure boundary are lumped
/// into the top bucket since any decrement `>= condition` already absorbs.
/// Built either from a [`ComponentSpec`]'s Weibull parameters or from an
/// explicit probability vector (used by small hand-built kernels in tests).
#[derive(Debug, Clone, PartialEq)]
pub struct DecayKernel {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl DecayKernel {
    /// Quantizes `Weibull(shape, step_scale)` to integer decrements, with
    /// `step_scale` calibrated so the mean decrement is
    /// `max_condition / weibull_scale` (expected lifetime ~ `weibull_scale`
    /// steps). The Weibull mean is `step_scale * Gamma(1 + 1/shape)`.
    pub fn from_spec(spec: &ComponentSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let shape = spec.weibull_shape;
        let gamma_mean = libm::tgamma(1.0 + 1.0 / shape);
        let step_scale =
            (f64::from(spec.max_condition) / (spec.weibull_scale * gamma_mean)).max(1e-9);
        let max = spec.max_condition as usize;
        let cdf_at = |x: f64| -> f64 {
            if x <= 0.0 {
                0.0
            } else {
                -(-(x / step_scale).powf(shape)).exp_m1()
            }
        };
        let mut probs = vec![0.0; max + 1];
        for (d, p) in probs.iter_mut().enumerate() {
            let lo = d as f64 - 0.5;
            let hi = d as f64 + 0.5;
            *p = if d == max {
                1.0 - cdf_at(lo)
            } else {
                cdf_at(hi) - cdf_at(lo)
            };
        }
        Self::from_probs(probs)
    }

    /// Builds a kernel from an explicit decrement distribution.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.len() < 2 {
            return Err(ModelError::InvalidParameter(
                "decrement distribution needs at least two buckets".into(),
            ));
        }
        let mut total = 0.0;
        for &p in &probs {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(ModelError::InvalidParameter(format!(
                    "decrement probability out of range: {p}"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidParameter(format!(
                "decrement probabilities sum to {total}, expected 1"
            )));
        }
        if probs[1..].iter().sum::<f64>() <= 0.0 {
            return Err(ModelError::NoDecay);
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        *cdf.last_mut().expect("nonempty") = 1.0;
        Ok(Self { probs, cdf })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_decrement(&self) -> u32 {
        (self.probs.len() - 1) as u32
    }

    /// Samples one integer decrement by inverse-CDF lookup.
    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        let u: f64 = rng.random();
        // First index with cdf >= u.
        match self
            .cdf
            .binary_search_by(|c| c.partial_cmp(&u).expect("finite cdf"))
        {
            Ok(i) => i as u32,
            Err(i) => (i.min(self.cdf.len() - 1)) as u32,
        }
    }

    /// Mean decrement per step.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(d, p)| d as f64 * p)
            .sum()
    }
}

/// A fleet: the components, the shared budget, and the planning horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub components: Vec<ComponentSpec>,
    /// Shared budget in integer units.
    pub total_budget: u64,
    /// Planning horizon in decision steps (>= 1).
    pub horizon: u32,
}

impl Fleet {
    pub fn new(
        components: Vec<ComponentSpec>,
        total_budget: u64,
        horizon: u32,
    ) -> Result<Self, ModelError> {
        let fleet = Self {
            components,
            total_budget,
            horizon,
        };
        fleet.validate()?;
        Ok(fleet)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.horizon < 1 {
            return Err(ModelError::InvalidParameter("horizon must be >= 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for spec in &self.components {
            spec.validate()?;
            if !seen.insert(spec.id.as_str()) {
                return Err(ModelError::DuplicateId(spec.id.clone()));
            }
        }
        Ok(())
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<(), ModelError> {
        let doc = FleetFile {
            schema_version: FLEET_SCHEMA.to_string(),
            components: self.components.clone(),
            total_budget: self.total_budget,
            horizon: self.horizon,
        };
        let text = serde_json::to_string_pretty(&doc)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let doc: FleetFile = serde_json::from_str(&text)?;
        if doc.schema_version != FLEET_SCHEMA {
            return Err(ModelError::SchemaMismatch {
                expected: FLEET_SCHEMA.to_string(),
                found: doc.schema_version,
            });
        }
        Fleet::new(doc.components, doc.total_budget, doc.horizon)
    }

    pub fn content_hash(&self) -> u64 {
        let mut bytes = Vec::new();
        for spec in &self.components {
            bytes.extend_from_slice(&spec.content_hash().to_le_bytes());
        }
        bytes.extend_from_slice(&self.total_budget.to_le_bytes());
        bytes.extend_from_slice(&self.horizon.to_le_bytes());
        fnv1a64(&bytes)
    }
}

/// On-disk fleet document with a schema version at the top level.
#[derive(Debug, Serialize, Deserialize)]
struct FleetFile {
    schema_version: String,
    components: Vec<ComponentSpec>,
    total_budget: u64,
    horizon: u32,
}

/// Per-component budget split plus solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    /// Integer budget per component, summing to at most the total budget.
    pub budgets: Vec<u64>,
    /// Equalized marginal value at the solution, when one exists.
    pub multiplier: Option<f64>,
    /// Predicted objective (sum of modeled survival times) at the allocation.
    pub objective_estimate: f64,
    pub diagnostics: AllocationDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AllocationDiagnostics {
    /// Continuous solution before integer rounding (empty when the solver
    /// works directly on integers).
    pub continuous: Vec<f64>,
    /// Bisection (or DP) iterations performed.
    pub iterations: u32,
    /// Budget left unassigned (nonzero only for saturated/flat instances).
    pub unspent: u64,
}

impl AllocationResult {
    pub fn spent(&self) -> u64 {
        self.budgets.iter().sum()
    }

    pub fn validate(&self, total_budget: u64) -> Result<(), ModelError> {
        if self.spent() > total_budget {
            return Err(ModelError::InvalidParameter(format!(
                "allocation spends {} of {}",
                self.spent(),
                total_budget
            )));
        }
        Ok(())
    }
}

/// Inclusive sampling ranges for generated fleets.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CostRanges {
    pub repair_lo: u64,
    pub repair_hi: u64,
    pub inspect_lo: u64,
    pub inspect_hi: u64,
}

impl CostRanges {
    /// Industry-average defaults: repairs 50..=500 units, inspections 1..=5.
    pub fn defaults() -> Self {
        Self {
            repair_lo: 50,
            repair_hi: 500,
            inspect_lo: 1,
            inspect_hi: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeibullRanges {
    pub shape_lo: f64,
    pub shape_hi: f64,
    pub scale_lo: f64,
    pub scale_hi: f64,
}

impl WeibullRanges {
    /// Defaults spanning gentle to pronounced wear-out over a 100-step horizon.
    pub fn defaults() -> Self {
        Self {
            shape_lo: 0.8,
            shape_hi: 3.0,
            scale_lo: 30.0,
            scale_hi: 120.0,
        }
    }
}

/// Generates a synthetic fleet with parameters drawn uniformly from the
/// given ranges. Deterministic for a fixed `(count, seed, ranges)`.
///
/// The returned fleet uses a 100-step horizon and a total budget of
/// 500 units per component; both are plain fields the caller may override.
pub fn generate_fleet(
    count: usize,
    seed: u64,
    costs: CostRanges,
    weibull: WeibullRanges,
) -> Result<Fleet, ModelError> {
    if count < 1 {
        return Err(ModelError::InvalidParameter("count must be >= 1".into()));
    }
    check_range(costs.repair_lo as f64, costs.repair_hi as f64)?;
    check_range(costs.inspect_lo as f64, costs.inspect_hi as f64)?;
    check_range(weibull.shape_lo, weibull.shape_hi)?;
    check_range(weibull.scale_lo, weibull.scale_hi)?;

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x0f1e_e7]));
    let mut components = Vec::with_capacity(count);
    for i in 0..count {
        let shape = sample_uniform(&mut rng, weibull.shape_lo, weibull.shape_hi);
        let scale = sample_uniform(&mut rng, weibull.scale_lo, weibull.scale_hi);
        let repair = rng.random_range(costs.repair_lo..=costs.repair_hi);
        let inspect = rng
            .random_range(costs.inspect_lo..=costs.inspect_hi)
            .min(repair);
        components.push(ComponentSpec::new(
            format!("comp-{i:04}"),
            shape,
            scale,
            repair,
            inspect,
        )?);
    }
    Fleet::new(components, 500 * count as u64, 100)
}

fn check_range(lo: f64, hi: f64) -> Result<(), ModelError> {
    if lo > hi {
        return Err(ModelError::InvalidRange { low: lo, high: hi });
    }
    Ok(())
}

fn sample_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

/// Safety cap on a single sampled lifetime; components whose decay is slow
/// enough to hit it saturate the estimate rather than loop forever.
const LIFETIME_SAMPLE_CAP: u64 = 10_000_000;

/// Monte-Carlo estimate of the time to absorption under always-Degrade,
/// starting from full condition. Returns the sample mean and the unbiased
/// sample variance of the lifetime in steps.
pub fn expected_unrepaired_lifetime(
    spec: &ComponentSpec,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), ModelError> {
    if samples < 1 {
        return Err(ModelError::InvalidParameter("samples must be >= 1".into()));
    }
    let kernel = spec.decay_kernel()?;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x11f3]));
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let mut condition = spec.max_condition;
        let mut steps: u64 = 0;
        while condition > 0 && steps < LIFETIME_SAMPLE_CAP {
            condition = condition.saturating_sub(kernel.sample(&mut rng));
            steps += 1;
        }
        let t = steps as f64;
        sum += t;
        sum_sq += t * t;
    }
    let n = samples as f64;
    let mean = sum / n;
    let variance = if samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, variance))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic_spec() -> ComponentSpec {
        ComponentSpec::new("c0", 1.5, 60.0, 200, 3).unwrap()
    }

    #[test]
    fn spec_validation_rejects_bad_parameters() {
        assert!(ComponentSpec::new("x", 0.0, 60.0, 200, 3).is_err());
        assert!(ComponentSpec::new("x", 1.0, -1.0, 200, 3).is_err());
        assert!(ComponentSpec::new("x", 1.0, 60.0, 0, 3).is_err());
        assert!(ComponentSpec::new("x", 1.0, 60.0, 10, 11).is_err());
        assert!(basic_spec().with_max_condition(0).is_err());
    }

    #[test]
    fn action_costs() {
        let spec = basic_spec();
        assert_eq!(ActionKind::Degrade.cost(&spec), 0);
        assert_eq!(ActionKind::Inspect.cost(&spec), 3);
        assert_eq!(ActionKind::Repair.cost(&spec), 200);
    }

    #[test]
    fn kernel_probabilities_sum_to_one() {
        let kernel = basic_spec().decay_kernel().unwrap();
        let total: f64 = kernel.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "sum {total}");
        assert!(kernel.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn kernel_mean_tracks_lifetime_target() {
        // Mean decrement should be about max_condition / weibull_scale.
        for scale in [30.0, 60.0, 120.0] {
            let spec = ComponentSpec::new("c", 1.5, scale, 200, 3).unwrap();
            let kernel = spec.decay_kernel().unwrap();
            let target = 100.0 / scale;
            assert!(
                (kernel.mean() - target).abs() < 0.35 * target + 0.05,
                "scale {scale}: mean {} vs target {target}",
                kernel.mean()
            );
        }
    }

    #[test]
    fn degenerate_kernel_single_step_death() {
        // Enormous shape makes the Weibull a point mass; scale 1 puts it at
        // a full-condition decrement.
        let spec = ComponentSpec::new("c", 1e9, 1.0, 200, 3).unwrap();
        let kernel = spec.decay_kernel().unwrap();
        assert_eq!(kernel.probs()[100], 1.0);
        let (mean, var) = expected_unrepaired_lifetime(&spec, 50, 7).unwrap();
        assert_eq!(mean, 1.0);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn degenerate_kernel_unit_countdown() {
        let spec = ComponentSpec::new("c", 1e9, 100.0, 200, 3).unwrap();
        let kernel = spec.decay_kernel().unwrap();
        assert_eq!(kernel.probs()[1], 1.0);
        let (mean, var) = expected_unrepaired_lifetime(&spec, 20, 7).unwrap();
        assert_eq!(mean, 100.0);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn lifetime_close_to_larger_run() {
        // Small-sample mean within 3 standard errors of a 10x larger run.
        let spec = basic_spec();
        let (mean_small, var_small) = expected_unrepaired_lifetime(&spec, 400, 11).unwrap();
        let (mean_big, _) = expected_unrepaired_lifetime(&spec, 4000, 1213).unwrap();
        let se = (var_small / 400.0).sqrt();
        assert!(
            (mean_small - mean_big).abs() <= 3.0 * se,
            "small {mean_small} big {mean_big} se {se}"
        );
    }

    #[test]
    fn lifetime_monotone_in_scale() {
        let mut last = 0.0;
        for scale in [20.0, 40.0, 80.0, 160.0] {
            let spec = ComponentSpec::new("c", 1.5, scale, 200, 3).unwrap();
            let (mean, _) = expected_unrepaired_lifetime(&spec, 600, 99).unwrap();
            assert!(
                mean > last,
                "scale {scale}: mean {mean} not above previous {last}"
            );
            last = mean;
        }
    }

    #[test]
    fn generate_fleet_is_deterministic_and_in_range() {
        let costs = CostRanges::defaults();
        let weibull = WeibullRanges::defaults();
        let a = generate_fleet(50, 42, costs, weibull).unwrap();
        let b = generate_fleet(50, 42, costs, weibull).unwrap();
        assert_eq!(a, b);
        for spec in &a.components {
            assert!((50..=500).contains(&spec.repair_cost));
            assert!((1..=5).contains(&spec.inspect_cost));
            assert!(spec.weibull_shape >= 0.8 && spec.weibull_shape <= 3.0);
            assert!(spec.weibull_scale >= 30.0 && spec.weibull_scale <= 120.0);
        }
        let c = generate_fleet(50, 43, costs, weibull).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generate_fleet_degenerate_ranges() {
        let costs = CostRanges {
            repair_lo: 100,
            repair_hi: 100,
            inspect_lo: 2,
            inspect_hi: 2,
        };
        let weibull = WeibullRanges {
            shape_lo: 1.5,
            shape_hi: 1.5,
            scale_lo: 50.0,
            scale_hi: 50.0,
        };
        let fleet = generate_fleet(1, 7, costs, weibull).unwrap();
        let spec = &fleet.components[0];
        assert_eq!(spec.repair_cost, 100);
        assert_eq!(spec.inspect_cost, 2);
        assert_eq!(spec.weibull_shape, 1.5);
        assert_eq!(spec.weibull_scale, 50.0);
    }

    #[test]
    fn generate_fleet_rejects_bad_ranges() {
        let mut costs = CostRanges::defaults();
        costs.repair_lo = 600;
        let err = generate_fleet(3, 1, costs, WeibullRanges::defaults());
        assert!(matches!(err, Err(ModelError::InvalidRange { .. })));
    }

    #[test]
    fn fleet_rejects_duplicate_ids() {
        let spec = basic_spec();
        let err = Fleet::new(vec![spec.clone(), spec], 1000, 100);
        assert!(matches!(err, Err(ModelError::DuplicateId(_))));
    }

    #[test]
    fn fleet_json_round_trip_is_exact() {
        let fleet = generate_fleet(8, 3, CostRanges::defaults(), WeibullRanges::defaults())
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fleet.json");
        fleet.save_json(&path).unwrap();
        let loaded = Fleet::load_json(&path).unwrap();
        assert_eq!(fleet, loaded);
    }

    #[test]
    fn fleet_load_rejects_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fleet.json");
        std::fs::write(
            &path,
            r#"{"schema_version":"fleet/9","components":[],"total_budget":0,"horizon":1}"#,
        )
        .unwrap();
        assert!(matches!(
            Fleet::load_json(&path),
            Err(ModelError::SchemaMismatch { .. })
        ));
    }
}
