//! Survival-versus-budget curves.
//!
//! A component's expected survival time as a function of its allocated
//! budget `b` is modeled as `T(b) = alpha * exp(beta * b) + gamma` with
//! `alpha <= 0` and `beta <= 0`, which makes the curve nondecreasing and
//! concave on `b >= 0`. The two boundary conditions pin `alpha` and `gamma`
//! analytically: at infinite budget the curve saturates at the horizon
//! (`gamma = horizon`), and at zero budget it equals the unrepaired survival
//! time (`alpha = t(0) - horizon`). Only `beta` is fitted, by bounded 1-D
//! least squares on simulated `(budget, survival)` pairs — or predicted by
//! the random-forest regressor in [`forest`] when simulating a component is
//! too expensive.

pub mod forest;

pub use forest::{train_forest, ForestConfig, ForestModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ComponentSpec, ModelError};
use crate::sim::{run_episode, AlwaysDegrade, ComponentEnv, EpisodeOptions, SimError};

/// Lower bound of the `beta` search; at `beta = -1` the exponential
/// saturates within a few budget units, far steeper than any component.
pub const BETA_LOWER_BOUND: f64 = -1.0;

#[derive(Debug, Error)]
pub enum SurvivalError {
    #[error("invalid curve parameter: {0}")]
    InvalidParameter(String),
    #[error("zero-budget survival {survival} exceeds horizon {horizon}")]
    SurvivalAboveHorizon { survival: f64, horizon: u32 },
    #[error("need at least {needed} data points, got {got}")]
    NotEnoughData { needed: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("curve table csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("curve table i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("curve table field: {0}")]
    Parse(String),
}

/// Fitted exponential survival curve for one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub component_id: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl SurvivalCurve {
    pub fn new(
        component_id: impl Into<String>,
        alpha: f64,
        beta: f64,
        gamma: f64,
    ) -> Result<Self, SurvivalError> {
        if !(alpha <= 0.0) || !alpha.is_finite() {
            return Err(SurvivalError::InvalidParameter(format!(
                "alpha must be <= 0 and finite, got {alpha}"
            )));
        }
        if !(beta <= 0.0) || !beta.is_finite() {
            return Err(SurvivalError::InvalidParameter(format!(
                "beta must be <= 0 and finite, got {beta}"
            )));
        }
        if !gamma.is_finite() {
            return Err(SurvivalError::InvalidParameter(format!(
                "gamma must be finite, got {gamma}"
            )));
        }
        Ok(Self {
            component_id: component_id.into(),
            alpha,
            beta,
            gamma,
        })
    }

    /// Modeled expected survival at budget `b`.
    pub fn evaluate(&self, budget: f64) -> f64 {
        self.alpha * (self.beta * budget).exp() + self.gamma
    }

    /// First derivative `alpha * beta * exp(beta * b)`; nonnegative and
    /// nonincreasing, the marginal value the allocator equalizes.
    pub fn marginal(&self, budget: f64) -> f64 {
        self.alpha * self.beta * (self.beta * budget).exp()
    }

    /// Whether budget moves this curve at all.
    pub fn is_flat(&self) -> bool {
        self.alpha == 0.0 || self.beta == 0.0
    }
}

/// Solves the two boundary conditions of the exponential model: saturation
/// at the horizon pins `gamma = horizon`, the zero-budget survival pins
/// `alpha = t_at_zero_budget - horizon <= 0`.
pub fn boundary_parameters(
    t_at_zero_budget: f64,
    horizon: u32,
) -> Result<(f64, f64), SurvivalError> {
    if !(t_at_zero_budget > 0.0) || !t_at_zero_budget.is_finite() {
        return Err(SurvivalError::InvalidParameter(format!(
            "zero-budget survival must be positive, got {t_at_zero_budget}"
        )));
    }
    if t_at_zero_budget > f64::from(horizon) {
        return Err(SurvivalError::SurvivalAboveHorizon {
            survival: t_at_zero_budget,
            horizon,
        });
    }
    let gamma = f64::from(horizon);
    let alpha = t_at_zero_budget - gamma;
    Ok((alpha, gamma))
}

/// Monte-Carlo estimate of survival with no budget: `runs` always-Degrade
/// episodes, averaged (capped at the horizon by construction).
pub fn zero_budget_survival(
    spec: &ComponentSpec,
    horizon: u32,
    runs: u32,
    seed: u64,
) -> Result<f64, SurvivalError> {
    if runs < 1 {
        return Err(SurvivalError::InvalidParameter("runs must be >= 1".into()));
    }
    let env = ComponentEnv::new(spec.clone(), horizon)?;
    let opts = EpisodeOptions {
        n_particles: 1,
        record_trajectory: false,
    };
    let mut total = 0.0;
    for run in 0..runs {
        let episode_seed = crate::seeding::derive_seed(seed, &[0x0b0d, u64::from(run)]);
        let record = run_episode(&env, 0, &mut AlwaysDegrade, episode_seed, &opts)?;
        total += f64::from(record.survival_time);
    }
    Ok(total / f64::from(runs))
}

fn sse(pairs: &[(f64, f64)], alpha: f64, gamma: f64, beta: f64) -> f64 {
    pairs
        .iter()
        .map(|&(b, t)| {
            let r = alpha * (beta * b).exp() + gamma - t;
            r * r
        })
        .sum()
}

/// Fits `beta` by bounded 1-D least squares on `(budget, mean survival)`
/// pairs with `alpha` and `gamma` fixed: a coarse grid over
/// `[BETA_LOWER_BOUND, 0]` brackets the minimum and golden-section search
/// refines it. Pairs are sorted internally, so the result does not depend on
/// their order. A flat curve (`alpha = 0`) returns `beta = 0` directly.
pub fn fit_beta(pairs: &[(f64, f64)], alpha: f64, gamma: f64) -> Result<f64, SurvivalError> {
    if pairs.len() < 2 {
        return Err(SurvivalError::NotEnoughData {
            needed: 2,
            got: pairs.len(),
        });
    }
    if !(alpha <= 0.0) || !alpha.is_finite() {
        return Err(SurvivalError::InvalidParameter(format!(
            "alpha must be <= 0, got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let mut sorted: Vec<(f64, f64)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite pairs"));

    // Coarse bracket: log-spaced magnitudes plus the exact endpoints.
    let mut candidates = vec![0.0, BETA_LOWER_BOUND];
    let mut magnitude = 1e-7;
    while magnitude < BETA_LOWER_BOUND.abs() {
        candidates.push(-magnitude);
        magnitude *= 1.5;
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut best_idx = 0;
    let mut best_sse = f64::INFINITY;
    for (i, &beta) in candidates.iter().enumerate() {
        let e = sse(&sorted, alpha, gamma, beta);
        if e < best_sse {
            best_sse = e;
            best_idx = i;
        }
    }
    let lo = if best_idx == 0 {
        candidates[0]
    } else {
        candidates[best_idx - 1]
    };
    let hi = if best_idx + 1 == candidates.len() {
        candidates[best_idx]
    } else {
        candidates[best_idx + 1]
    };

    // Golden-section search on [lo, hi].
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = sse(&sorted, alpha, gamma, c);
    let mut fd = sse(&sorted, alpha, gamma, d);
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = sse(&sorted, alpha, gamma, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = sse(&sorted, alpha, gamma, d);
        }
    }
    let refined = 0.5 * (a + b);
    // Keep the exact coarse winner when refinement cannot beat it; this
    // returns beta = 0 exactly on flat data.
    let coarse = candidates[best_idx];
    let best = if sse(&sorted, alpha, gamma, refined) < sse(&sorted, alpha, gamma, coarse) {
        refined
    } else {
        coarse
    };
    Ok(best.clamp(BETA_LOWER_BOUND, 0.0))
}

/// Where a curve's `beta` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveSource {
    Fitted,
    Predicted,
}

impl CurveSource {
    fn as_str(self) -> &'static str {
        match self {
            CurveSource::Fitted => "fitted",
            CurveSource::Predicted => "predicted",
        }
    }
}

/// Writes the curve table CSV `(component_id, alpha, beta, gamma, source)`.
pub fn write_curve_csv(
    path: &std::path::Path,
    curves: &[(SurvivalCurve, CurveSource)],
) -> Result<(), SurvivalError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["component_id", "alpha", "beta", "gamma", "source"])?;
    for (curve, source) in curves {
        writer.write_record([
            curve.component_id.as_str(),
            &format!("{:e}", curve.alpha),
            &format!("{:e}", curve.beta),
            &format!("{:e}", curve.gamma),
            source.as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a curve table written by [`write_curve_csv`].
pub fn read_curve_csv(
    path: &std::path::Path,
) -> Result<Vec<(SurvivalCurve, CurveSource)>, SurvivalError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| -> Result<&str, SurvivalError> {
            row.get(i)
                .ok_or_else(|| SurvivalError::Parse(format!("missing column {i}")))
        };
        let num = |i: usize| -> Result<f64, SurvivalError> {
            field(i)?
                .parse::<f64>()
                .map_err(|e| SurvivalError::Parse(format!("column {i}: {e}")))
        };
        let source = match field(4)? {
            "fitted" => CurveSource::Fitted,
            "predicted" => CurveSource::Predicted,
            other => {
                return Err(SurvivalError::Parse(format!(
                    "unknown curve source {other:?}"
                )))
            }
        };
        out.push((
            SurvivalCurve::new(field(0)?, num(1)?, num(2)?, num(3)?)?,
            source,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boundary_parameters_from_the_two_conditions() {
        let (alpha, gamma) = boundary_parameters(30.0, 100).unwrap();
        assert_eq!(alpha, -70.0);
        assert_eq!(gamma, 100.0);

        // Budget-insensitive component.
        let (alpha, gamma) = boundary_parameters(100.0, 100).unwrap();
        assert_eq!(alpha, 0.0);
        assert_eq!(gamma, 100.0);

        assert!(boundary_parameters(101.0, 100).is_err());
        assert!(boundary_parameters(0.0, 100).is_err());
    }

    fn synthetic_pairs(alpha: f64, beta: f64, gamma: f64) -> Vec<(f64, f64)> {
        (0..=10)
            .map(|i| {
                let b = 500.0 * f64::from(i);
                (b, alpha * (beta * b).exp() + gamma)
            })
            .collect()
    }

    #[test]
    fn fit_beta_recovers_noiseless_curves() {
        for &beta in &[-0.01, -0.002, -0.0005] {
            let pairs = synthetic_pairs(-70.0, beta, 100.0);
            let fitted = fit_beta(&pairs, -70.0, 100.0).unwrap();
            assert!(
                (fitted - beta).abs() <= 1e-4,
                "beta {beta}: fitted {fitted}"
            );
        }
    }

    #[test]
    fn fit_beta_flat_data_returns_zero() {
        // All observations at the zero-budget level.
        let pairs: Vec<(f64, f64)> = (0..=10).map(|i| (500.0 * f64::from(i), 30.0)).collect();
        let fitted = fit_beta(&pairs, -70.0, 100.0).unwrap();
        assert_eq!(fitted, 0.0);
        // Degenerate flat curve short-circuits.
        assert_eq!(fit_beta(&pairs, 0.0, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn fit_beta_is_order_invariant() {
        let mut pairs = synthetic_pairs(-70.0, -0.002, 100.0);
        let forward = fit_beta(&pairs, -70.0, 100.0).unwrap();
        pairs.reverse();
        let reversed = fit_beta(&pairs, -70.0, 100.0).unwrap();
        pairs.swap(0, 5);
        pairs.swap(2, 8);
        let shuffled = fit_beta(&pairs, -70.0, 100.0).unwrap();
        assert_eq!(forward.to_bits(), reversed.to_bits());
        assert_eq!(forward.to_bits(), shuffled.to_bits());
    }

    #[test]
    fn fit_beta_rejects_bad_input() {
        assert!(matches!(
            fit_beta(&[(0.0, 30.0)], -70.0, 100.0),
            Err(SurvivalError::NotEnoughData { .. })
        ));
        assert!(fit_beta(&[(0.0, 30.0), (1.0, 31.0)], 70.0, 100.0).is_err());
    }

    #[test]
    fn curve_validation() {
        assert!(SurvivalCurve::new("c", -70.0, -0.002, 100.0).is_ok());
        assert!(SurvivalCurve::new("c", 1.0, -0.002, 100.0).is_err());
        assert!(SurvivalCurve::new("c", -70.0, 0.1, 100.0).is_err());
        assert!(SurvivalCurve::new("c", -70.0, f64::NAN, 100.0).is_err());
    }

    #[test]
    fn zero_budget_survival_is_capped_and_positive() {
        let spec = ComponentSpec::new("z", 1.5, 60.0, 200, 3).unwrap();
        let t = zero_budget_survival(&spec, 100, 50, 3).unwrap();
        assert!(t > 0.0 && t <= 100.0, "t = {t}");
    }

    #[test]
    fn curve_csv_round_trip() {
        let rows = vec![
            (
                SurvivalCurve::new("c1", -70.0, -0.002, 100.0).unwrap(),
                CurveSource::Fitted,
            ),
            (
                SurvivalCurve::new("c2", -40.0, -0.0007, 100.0).unwrap(),
                CurveSource::Predicted,
            ),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        write_curve_csv(&path, &rows).unwrap();
        let loaded = read_curve_csv(&path).unwrap();
        assert_eq!(rows, loaded);
    }

    proptest! {
        /// Concavity certificate: any admissible parameter pair yields a
        /// curve that is nondecreasing with nonincreasing increments on a
        /// budget grid.
        #[test]
        fn curves_are_nondecreasing_and_concave(
            alpha in -100.0f64..=0.0,
            beta in -0.05f64..=0.0,
        ) {
            let curve = SurvivalCurve::new("p", alpha, beta, 100.0).unwrap();
            let values: Vec<f64> = (0..=50).map(|i| curve.evaluate(f64::from(i) * 100.0)).collect();
            for w in values.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9);
            }
            let increments: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
            for w in increments.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
            // Analytic certificate on the parameters themselves.
            prop_assert!(curve.marginal(0.0) >= 0.0);
            prop_assert!(curve.alpha * curve.beta * curve.beta <= 1e-12);
        }
    }
}
