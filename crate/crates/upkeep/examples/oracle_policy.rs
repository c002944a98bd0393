//! Build the exact oracle policy for one component and inspect it: value
//! surface samples, the repair region, and an episode driven by the oracle.
//!
//! ```bash
//! cargo run --example oracle_policy
//! ```

use upkeep::model::{ActionKind, ComponentSpec};
use upkeep::oracle::{build_oracle, OracleDecision, OracleLimits};
use upkeep::sim::{run_episode, ComponentEnv, EpisodeOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ComponentSpec::new("pump-03", 1.6, 35.0, 120, 2)?;
    let horizon = 100;
    let budget = 1000;
    let policy = build_oracle(&spec, budget, horizon, &OracleLimits::default())?;

    println!(
        "oracle for budget {budget}, horizon {horizon}: up to {} repairs",
        policy.max_repairs()
    );
    println!(
        "expected survival from full condition: {:.2} steps",
        policy.value_by_repairs(0, 100, 0)
    );

    // Where does the oracle repair at step 10 with everything affordable?
    let repair_region: Vec<u32> = (1..=100)
        .filter(|&c| policy.action_by_repairs(10, c, 0) == ActionKind::Repair)
        .collect();
    match (repair_region.first(), repair_region.last()) {
        (Some(lo), Some(hi)) => {
            println!("repair region at step 10: conditions {lo}..={hi}");
        }
        _ => println!("the oracle never repairs at step 10"),
    }

    let env = ComponentEnv::new(spec, horizon)?;
    let mut driver = OracleDecision::new(&policy);
    let record = run_episode(&env, budget, &mut driver, 7, &EpisodeOptions::default())?;
    println!(
        "episode under the oracle: survived {} steps with {} repairs, cost {}",
        record.survival_time, record.repairs, record.total_cost
    );
    Ok(())
}
