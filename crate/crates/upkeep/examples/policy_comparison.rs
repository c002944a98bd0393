//! Compare the oracle, the guided agent, the periodic heuristic and the
//! vanilla agent across budget levels with paired seeds.
//!
//! ```bash
//! cargo run --release --example policy_comparison
//! ```

use upkeep::agent::{train_meta_ppo, PpoHyper};
use upkeep::bench::{run_policy_sweep, PolicyRoster, SweepOptions};
use upkeep::model::{generate_fleet, CostRanges, WeibullRanges};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fleet = generate_fleet(
        3,
        17,
        CostRanges::defaults(),
        WeibullRanges {
            scale_lo: 25.0,
            scale_hi: 60.0,
            ..WeibullRanges::defaults()
        },
    )?;
    let budgets = [0u64, 500, 1500, 3000];

    let hyper = PpoHyper {
        n_particles: 256,
        ..PpoHyper::default()
    };
    let pairs: Vec<_> = fleet
        .components
        .iter()
        .flat_map(|s| budgets.iter().filter(|&&b| b > 0).map(|&b| (s.clone(), b)))
        .collect();
    println!("training guided and vanilla agents (30k steps each)...");
    let (guided, _) = train_meta_ppo(&pairs, fleet.horizon, 30_000, &hyper, true, 9)?;
    let (vanilla, _) = train_meta_ppo(&pairs, fleet.horizon, 30_000, &hyper, false, 9)?;

    let roster = PolicyRoster {
        oracle: true,
        guided: Some(&guided),
        heuristic: Some((5, 15)),
        vanilla: Some(&vanilla),
    };
    let opts = SweepOptions {
        runs: 40,
        seed: 23,
        n_particles: 256,
        ..SweepOptions::default()
    };
    let outcome = run_policy_sweep(&fleet, &budgets, &roster, &opts)?;

    println!(
        "\n{:<10} {:>7} {:>10} {:>9} {:>9} {:>9}",
        "policy", "budget", "survival", "repairs", "cost", "stderr"
    );
    for row in &outcome.rows {
        println!(
            "{:<10} {:>7} {:>10.2} {:>9.2} {:>9.1} {:>9.3}",
            row.policy, row.budget, row.mean_survival, row.mean_repairs, row.mean_cost, row.std_error
        );
    }
    println!(
        "\n{} episodes, safety violations: {} cost, {} monotonicity",
        outcome.episodes, outcome.safety.cost_violations, outcome.safety.monotonicity_violations
    );
    Ok(())
}
