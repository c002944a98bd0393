//! Run budget-guarded episodes for one component under two simple policies
//! and export the records as CSV.
//!
//! ```bash
//! cargo run --example simulate_episodes
//! ```

use upkeep::agent::heuristic_policy;
use upkeep::model::ComponentSpec;
use upkeep::sim::{run_episode, write_episode_csv, AlwaysDegrade, ComponentEnv, EpisodeOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ComponentSpec::new("boiler-07", 1.8, 45.0, 180, 3)?;
    let env = ComponentEnv::new(spec, 100)?;
    let opts = EpisodeOptions::default();
    let budget = 1200;

    let mut records = Vec::new();
    println!(
        "{:<16} {:>5} {:>9} {:>7} {:>9} {:>6}",
        "policy", "seed", "survival", "repairs", "inspects", "cost"
    );
    for seed in 0..5 {
        let mut heuristic = heuristic_policy(5, 15)?;
        let rec = run_episode(&env, budget, &mut heuristic, seed, &opts)?;
        println!(
            "{:<16} {:>5} {:>9} {:>7} {:>9} {:>6}",
            rec.policy_name, seed, rec.survival_time, rec.repairs, rec.inspections, rec.total_cost
        );
        records.push(rec);

        let rec = run_episode(&env, budget, &mut AlwaysDegrade, seed, &opts)?;
        println!(
            "{:<16} {:>5} {:>9} {:>7} {:>9} {:>6}",
            rec.policy_name, seed, rec.survival_time, rec.repairs, rec.inspections, rec.total_cost
        );
        records.push(rec);
    }

    let path = std::env::temp_dir().join("upkeep-example-episodes.csv");
    write_episode_csv(&path, &records)?;
    println!("\nwrote {}", path.display());
    Ok(())
}
