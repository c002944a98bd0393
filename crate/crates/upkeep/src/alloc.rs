//! Shared-budget allocation over concave survival curves.
//!
//! The objective `sum_i T_i(b_i)` with `T_i(b) = alpha_i exp(beta_i b) +
//! gamma_i`, `alpha_i, beta_i <= 0`, is separable and concave, so the
//! optimum equalizes marginal values: there is a multiplier `lambda` with
//! `b_i(lambda) = max(0, ln(lambda / (alpha_i beta_i)) / beta_i)` for every
//! curve that budget can move, and `sum_i b_i(lambda)` is continuous and
//! decreasing in `lambda`. [`allocate_kkt`] bisects `lambda` until the spend
//! matches the budget, then rounds to integer units by largest remainder.
//!
//! [`allocate_bruteforce`] is the verification oracle: exact stage-wise
//! dynamic programming over grid-quantized allocations. The proportional
//! baseline splits the budget by `repair_cost / expected lifetime`.

use thiserror::Error;

use crate::model::{AllocationDiagnostics, AllocationResult, ComponentSpec};
use crate::survival::SurvivalCurve;

/// Default ceiling on DP cells `(components x budget cells)`.
pub const DEFAULT_DP_CELL_CAP: usize = 50_000_000;

#[derive(Debug, Error)]
pub enum AllocError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dynamic program needs {cells} cells, cap is {cap}")]
    DpCellCap { cells: usize, cap: usize },
}

fn validate_curves(curves: &[SurvivalCurve]) -> Result<(), AllocError> {
    if curves.is_empty() {
        return Err(AllocError::InvalidInput("no curves".into()));
    }
    for c in curves {
        if !(c.alpha <= 0.0 && c.beta <= 0.0) {
            return Err(AllocError::InvalidInput(format!(
                "curve {} violates alpha <= 0, beta <= 0",
                c.component_id
            )));
        }
    }
    Ok(())
}

fn objective(curves: &[SurvivalCurve], budgets: &[u64]) -> f64 {
    curves
        .iter()
        .zip(budgets)
        .map(|(c, &b)| c.evaluate(b as f64))
        .sum()
}

/// Largest-remainder integerization of a continuous allocation: floors every
/// entry, then hands out the remaining whole units in order of fractional
/// remainder (ties to the lower index) without exceeding `total_budget`.
fn integerize(continuous: &[f64], total_budget: u64) -> Vec<u64> {
    let floors: Vec<u64> = continuous.iter().map(|&b| b.max(0.0) as u64).collect();
    let floor_sum: u64 = floors.iter().sum();
    let target = continuous.iter().sum::<f64>().round().min(total_budget as f64) as u64;
    let mut extra = target.saturating_sub(floor_sum) as usize;
    let mut order: Vec<usize> = (0..continuous.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = continuous[a] - continuous[a].floor();
        let rb = continuous[b] - continuous[b].floor();
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    let mut budgets = floors;
    for &i in &order {
        if extra == 0 {
            break;
        }
        budgets[i] += 1;
        extra -= 1;
    }
    budgets
}

/// Water-filling solution of the concave allocation problem.
///
/// `tolerance` bounds the bisection residual `|sum b_i(lambda) - B|` in
/// budget units. Curves that budget cannot move get zero; if every curve is
/// flat the whole budget is reported unspent and no multiplier exists.
pub fn allocate_kkt(
    curves: &[SurvivalCurve],
    total_budget: u64,
    tolerance: f64,
) -> Result<AllocationResult, AllocError> {
    validate_curves(curves)?;
    if !(tolerance > 0.0) {
        return Err(AllocError::InvalidInput(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let n = curves.len();
    // Curves with alpha*beta > 0 respond to budget; the rest stay at zero.
    let active: Vec<usize> = (0..n).filter(|&i| !curves[i].is_flat()).collect();
    if active.is_empty() || total_budget == 0 {
        let budgets = vec![0u64; n];
        return Ok(AllocationResult {
            objective_estimate: objective(curves, &budgets),
            budgets,
            multiplier: None,
            diagnostics: AllocationDiagnostics {
                continuous: vec![0.0; n],
                iterations: 0,
                unspent: total_budget,
            },
        });
    }

    let budget = total_budget as f64;
    // b_i(lambda): marginal-matching budget, clamped at zero.
    let fill = |lambda: f64, i: usize| -> f64 {
        let c = &curves[i];
        let m0 = c.alpha * c.beta; // marginal at b = 0
        if lambda >= m0 {
            0.0
        } else {
            ((lambda / m0).ln() / c.beta).max(0.0)
        }
    };
    let spend = |lambda: f64| -> f64 { active.iter().map(|&i| fill(lambda, i)).sum() };

    // Bracket: at the largest zero-budget marginal nothing is spent; at the
    // smallest marginal-at-B the spend is at least B.
    let hi = active
        .iter()
        .map(|&i| curves[i].marginal(0.0))
        .fold(f64::MIN, f64::max);
    let lo = active
        .iter()
        .map(|&i| curves[i].marginal(budget))
        .fold(f64::MAX, f64::min);
    let mut lo = lo.min(hi * 0.5);
    let mut hi = hi;
    let mut iterations = 0u32;
    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..200 {
        iterations += 1;
        lambda = 0.5 * (lo + hi);
        let s = spend(lambda);
        if (s - budget).abs() <= tolerance {
            break;
        }
        if s > budget {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    let continuous: Vec<f64> = (0..n)
        .map(|i| if curves[i].is_flat() { 0.0 } else { fill(lambda, i) })
        .collect();
    let budgets = integerize(&continuous, total_budget);
    let spent: u64 = budgets.iter().sum();
    Ok(AllocationResult {
        objective_estimate: objective(curves, &budgets),
        budgets,
        multiplier: Some(lambda),
        diagnostics: AllocationDiagnostics {
            continuous,
            iterations,
            unspent: total_budget - spent,
        },
    })
}

/// A violated optimality condition found by [`verify_kkt`].
#[derive(Debug, Clone, PartialEq)]
pub struct KktViolation {
    pub component_id: String,
    pub detail: String,
}

/// Checks the optimality certificate of a water-filling solution directly
/// from the curves: every funded component's marginal at its continuous
/// budget equals the multiplier (within `rel_tol`), and no unfunded
/// component has a larger zero-budget marginal.
pub fn verify_kkt(
    curves: &[SurvivalCurve],
    result: &AllocationResult,
    rel_tol: f64,
) -> Result<(), Vec<KktViolation>> {
    let Some(lambda) = result.multiplier else {
        // No multiplier: legitimate only when nothing was allocated.
        return if result.budgets.iter().all(|&b| b == 0) {
            Ok(())
        } else {
            Err(vec![KktViolation {
                component_id: String::new(),
                detail: "allocation without a multiplier".into(),
            }])
        };
    };
    let mut violations = Vec::new();
    for (i, curve) in curves.iter().enumerate() {
        let b = result.diagnostics.continuous[i];
        if b > 0.0 {
            let m = curve.marginal(b);
            if (m - lambda).abs() > rel_tol * lambda.max(f64::MIN_POSITIVE) {
                violations.push(KktViolation {
                    component_id: curve.component_id.clone(),
                    detail: format!("funded marginal {m} differs from multiplier {lambda}"),
                });
            }
        } else {
            let m0 = curve.marginal(0.0);
            if m0 > lambda * (1.0 + rel_tol) {
                violations.push(KktViolation {
                    component_id: curve.component_id.clone(),
                    detail: format!("unfunded component has marginal {m0} above {lambda}"),
                });
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Exact maximizer over grid-quantized allocations by stage-wise dynamic
/// programming: components are stages, whole grid units the resource.
pub fn allocate_bruteforce(
    curves: &[SurvivalCurve],
    total_budget: u64,
    grid: u64,
) -> Result<AllocationResult, AllocError> {
    allocate_bruteforce_capped(curves, total_budget, grid, DEFAULT_DP_CELL_CAP)
}

pub fn allocate_bruteforce_capped(
    curves: &[SurvivalCurve],
    total_budget: u64,
    grid: u64,
    cell_cap: usize,
) -> Result<AllocationResult, AllocError> {
    validate_curves(curves)?;
    if grid == 0 {
        return Err(AllocError::InvalidInput("grid must be positive".into()));
    }
    let n = curves.len();
    let cells_per_stage = (total_budget / grid) as usize + 1;
    let cells = n * cells_per_stage;
    if cells > cell_cap {
        return Err(AllocError::DpCellCap {
            cells,
            cap: cell_cap,
        });
    }

    // value[u] = best objective over the first `stage` components using
    // exactly <= u grid units; choice[stage][u] = units this stage takes.
    let mut value = vec![0.0f64; cells_per_stage];
    let mut choice = vec![vec![0usize; cells_per_stage]; n];
    for (stage, curve) in curves.iter().enumerate() {
        let mut next = vec![f64::NEG_INFINITY; cells_per_stage];
        for u in 0..cells_per_stage {
            for v in 0..=u {
                let b = (v as u64 * grid) as f64;
                let cand = value[u - v] + curve.evaluate(b);
                if cand > next[u] {
                    next[u] = cand;
                    choice[stage][u] = v;
                }
            }
        }
        value = next;
    }

    // Follow the choices back from the full budget.
    let mut budgets = vec![0u64; n];
    let mut u = cells_per_stage - 1;
    for stage in (0..n).rev() {
        let v = choice[stage][u];
        budgets[stage] = v as u64 * grid;
        u -= v;
    }
    let spent: u64 = budgets.iter().sum();
    Ok(AllocationResult {
        objective_estimate: objective(curves, &budgets),
        budgets,
        multiplier: None,
        diagnostics: AllocationDiagnostics {
            continuous: Vec::new(),
            iterations: n as u32,
            unspent: total_budget - spent,
        },
    })
}

/// Baseline split: budget proportional to `repair_cost / expected lifetime`,
/// rounded by largest remainder. Falls back to a uniform split if the
/// weights degenerate to zero.
pub fn allocate_proportional(
    specs: &[ComponentSpec],
    lifetimes: &[f64],
    total_budget: u64,
) -> Result<AllocationResult, AllocError> {
    if specs.is_empty() || specs.len() != lifetimes.len() {
        return Err(AllocError::InvalidInput(format!(
            "need matching specs and lifetimes, got {} and {}",
            specs.len(),
            lifetimes.len()
        )));
    }
    if lifetimes.iter().any(|&t| !(t > 0.0)) {
        return Err(AllocError::InvalidInput(
            "lifetimes must be positive".into(),
        ));
    }
    let weights: Vec<f64> = specs
        .iter()
        .zip(lifetimes)
        .map(|(s, &t)| s.repair_cost as f64 / t)
        .collect();
    let total: f64 = weights.iter().sum();
    let continuous: Vec<f64> = if total > 0.0 {
        weights
            .iter()
            .map(|w| total_budget as f64 * w / total)
            .collect()
    } else {
        vec![total_budget as f64 / specs.len() as f64; specs.len()]
    };
    let budgets = integerize(&continuous, total_budget);
    let spent: u64 = budgets.iter().sum();
    Ok(AllocationResult {
        budgets,
        multiplier: None,
        objective_estimate: 0.0,
        diagnostics: AllocationDiagnostics {
            continuous,
            iterations: 0,
            unspent: total_budget - spent,
        },
    })
}

/// Writes the allocation CSV
/// `(component_id, budget, marginal_at_allocation, method)`.
pub fn write_allocation_csv(
    path: &std::path::Path,
    curves: &[SurvivalCurve],
    result: &AllocationResult,
    method: &str,
) -> Result<(), std::io::Error> {
    let mut out = String::from("component_id,budget,marginal_at_allocation,method\n");
    for (curve, &budget) in curves.iter().zip(&result.budgets) {
        out.push_str(&format!(
            "{},{},{:e},{}\n",
            curve.component_id,
            budget,
            curve.marginal(budget as f64),
            method
        ));
    }
    std::fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn curve(id: &str, alpha: f64, beta: f64) -> SurvivalCurve {
        SurvivalCurve::new(id, alpha, beta, 100.0).unwrap()
    }

    #[test]
    fn single_component_takes_the_whole_budget() {
        let curves = vec![curve("a", -70.0, -0.002)];
        let result = allocate_kkt(&curves, 5000, 1e-9).unwrap();
        assert_eq!(result.budgets, vec![5000]);
        verify_kkt(&curves, &result, 1e-6).unwrap();
    }

    #[test]
    fn identical_curves_split_evenly() {
        let curves: Vec<_> = (0..4).map(|i| curve(&format!("c{i}"), -70.0, -0.002)).collect();
        let result = allocate_kkt(&curves, 1001, 1e-9).unwrap();
        assert_eq!(result.spent(), 1001);
        let max = *result.budgets.iter().max().unwrap();
        let min = *result.budgets.iter().min().unwrap();
        assert!(max - min <= 1, "{:?}", result.budgets);
        verify_kkt(&curves, &result, 1e-6).unwrap();
    }

    #[test]
    fn flat_curves_get_nothing_and_budget_is_reported_unspent() {
        let curves = vec![curve("a", 0.0, 0.0), curve("b", -50.0, 0.0)];
        let result = allocate_kkt(&curves, 1000, 1e-9).unwrap();
        assert_eq!(result.budgets, vec![0, 0]);
        assert_eq!(result.multiplier, None);
        assert_eq!(result.diagnostics.unspent, 1000);
        verify_kkt(&curves, &result, 1e-6).unwrap();
    }

    #[test]
    fn mixed_flat_and_active_curves() {
        let curves = vec![
            curve("flat", 0.0, 0.0),
            curve("steep", -70.0, -0.004),
            curve("shallow", -40.0, -0.001),
        ];
        let result = allocate_kkt(&curves, 2000, 1e-9).unwrap();
        assert_eq!(result.budgets[0], 0);
        assert_eq!(result.spent(), 2000);
        verify_kkt(&curves, &result, 1e-6).unwrap();
    }

    #[test]
    fn stronger_marginals_get_funded_first() {
        // At a tight budget only the component with the larger zero-budget
        // marginal should receive money.
        let curves = vec![curve("weak", -10.0, -0.0005), curve("strong", -90.0, -0.01)];
        let result = allocate_kkt(&curves, 100, 1e-9).unwrap();
        assert_eq!(result.budgets[0], 0, "{:?}", result.budgets);
        assert_eq!(result.budgets[1], 100);
        verify_kkt(&curves, &result, 1e-6).unwrap();
    }

    #[test]
    fn bruteforce_two_point_grid_picks_the_best_curve() {
        let curves = vec![curve("a", -30.0, -0.001), curve("b", -90.0, -0.001)];
        // grid == budget: each component gets everything or nothing.
        let result = allocate_bruteforce(&curves, 1000, 1000).unwrap();
        assert_eq!(result.budgets, vec![0, 1000]);
    }

    #[test]
    fn bruteforce_single_component() {
        let curves = vec![curve("a", -70.0, -0.002)];
        let result = allocate_bruteforce(&curves, 1000, 10).unwrap();
        assert_eq!(result.budgets, vec![1000]);
    }

    #[test]
    fn bruteforce_cap_is_enforced() {
        let curves = vec![curve("a", -70.0, -0.002)];
        assert!(matches!(
            allocate_bruteforce_capped(&curves, 1_000_000, 1, 100),
            Err(AllocError::DpCellCap { .. })
        ));
    }

    /// Cross-validation of the two solvers on randomized small instances.
    /// Budgets are whole grid multiples so the DP can spend exactly the
    /// same total; with curvature bounded by the sampled `beta` range the
    /// grid-quantization slack stays below the comparison tolerance.
    #[test]
    fn kkt_matches_bruteforce_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xa110c);
        for trial in 0..50 {
            let n = rng.random_range(1..=5);
            let budget = 10 * rng.random_range(20..=200u64);
            let curves: Vec<_> = (0..n)
                .map(|i| {
                    let alpha = -(10.0 + 80.0 * rng.random::<f64>());
                    let beta = -(5e-6 + 9.5e-5 * rng.random::<f64>());
                    curve(&format!("t{trial}-c{i}"), alpha, beta)
                })
                .collect();
            let kkt = allocate_kkt(&curves, budget, 1e-9).unwrap();
            let dp = allocate_bruteforce(&curves, budget, 10).unwrap();
            assert!(kkt.spent() <= budget);
            assert!(dp.spent() <= budget);
            verify_kkt(&curves, &kkt, 1e-6).unwrap();
            let rel = (kkt.objective_estimate - dp.objective_estimate).abs()
                / kkt.objective_estimate.abs().max(1.0);
            assert!(
                rel <= 1e-6,
                "trial {trial}: kkt {} vs dp {} (rel {rel})",
                kkt.objective_estimate,
                dp.objective_estimate
            );
        }
    }

    /// The DP optimum can never beat the KKT objective by more than the
    /// grid-quantization slack, even on steep curves.
    #[test]
    fn kkt_dominates_bruteforce_up_to_grid_slack() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xbead);
        for trial in 0..25 {
            let n = rng.random_range(2..=5);
            let budget = 10 * rng.random_range(20..=150u64);
            let grid = 10u64;
            let curves: Vec<_> = (0..n)
                .map(|i| {
                    let alpha = -(10.0 + 80.0 * rng.random::<f64>());
                    let beta = -(1e-4 + 9e-3 * rng.random::<f64>());
                    curve(&format!("s{trial}-c{i}"), alpha, beta)
                })
                .collect();
            let kkt = allocate_kkt(&curves, budget, 1e-9).unwrap();
            let dp = allocate_bruteforce(&curves, budget, grid).unwrap();
            // Second-order slack bound: sum_i |alpha_i| beta_i^2 grid^2 / 2,
            // plus one unit of first-order slack per component for rounding.
            let slack: f64 = curves
                .iter()
                .map(|c| {
                    0.5 * c.alpha.abs() * c.beta * c.beta * (grid * grid) as f64
                        + c.marginal(0.0)
                })
                .sum();
            assert!(
                kkt.objective_estimate >= dp.objective_estimate - slack,
                "trial {trial}: kkt {} vs dp {} slack {slack}",
                kkt.objective_estimate,
                dp.objective_estimate
            );
        }
    }

    #[test]
    fn objective_monotone_in_budget() {
        let curves = vec![curve("a", -70.0, -0.002), curve("b", -40.0, -0.0008)];
        let mut last = f64::NEG_INFINITY;
        for budget in [0u64, 100, 500, 1000, 2500, 5000] {
            let result = allocate_kkt(&curves, budget, 1e-9).unwrap();
            assert!(
                result.objective_estimate >= last - 1e-9,
                "objective decreased at B={budget}"
            );
            last = result.objective_estimate;
        }
    }

    #[test]
    fn proportional_splits() {
        let s = |id: &str, repair: u64| ComponentSpec::new(id, 1.5, 60.0, repair, 3).unwrap();
        // Identical components: even split.
        let result =
            allocate_proportional(&[s("a", 200), s("b", 200)], &[50.0, 50.0], 1000).unwrap();
        assert_eq!(result.budgets, vec![500, 500]);
        // Double repair cost, equal lifetimes: 2:1.
        let result =
            allocate_proportional(&[s("a", 400), s("b", 200)], &[50.0, 50.0], 900).unwrap();
        assert_eq!(result.budgets, vec![600, 300]);
        // Positive lifetimes are required.
        assert!(allocate_proportional(&[s("a", 200)], &[0.0], 100).is_err());
    }

    #[test]
    fn allocation_csv_has_expected_columns() {
        let curves = vec![curve("a", -70.0, -0.002)];
        let result = allocate_kkt(&curves, 500, 1e-9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("alloc.csv");
        write_allocation_csv(&path, &curves, &result, "kkt").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("component_id,budget,marginal_at_allocation,method\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(",kkt"));
    }

    proptest! {
        /// Feasibility invariant over random curve sets and budgets.
        #[test]
        fn allocations_are_always_feasible(
            seed in 0u64..1000,
            budget in 0u64..20_000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=8);
            let curves: Vec<_> = (0..n)
                .map(|i| {
                    let alpha = -(rng.random::<f64>() * 90.0);
                    let beta = -(rng.random::<f64>() * 0.01);
                    curve(&format!("f{i}"), alpha, beta)
                })
                .collect();
            let result = allocate_kkt(&curves, budget, 1e-9).unwrap();
            prop_assert!(result.spent() <= budget);
            prop_assert_eq!(result.budgets.len(), curves.len());
            prop_assert!(result.validate(budget).is_ok());
        }
    }
}
