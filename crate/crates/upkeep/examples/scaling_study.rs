//! Time the four pipeline stages across fleet sizes and report the log-log
//! slope of wall clock against component count.
//!
//! ```bash
//! cargo run --release --example scaling_study
//! ```

use upkeep::agent::{train_meta_ppo, PpoHyper};
use upkeep::bench::{run_scaling_study, ScalingConfig};
use upkeep::model::{generate_fleet, CostRanges, WeibullRanges};
use upkeep::survival::forest::component_features;
use upkeep::survival::{train_forest, ForestConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Prepared once, outside the timed region: a guided agent and a forest.
    let setup_fleet = generate_fleet(4, 3, CostRanges::defaults(), WeibullRanges::defaults())?;
    let pairs: Vec<_> = setup_fleet
        .components
        .iter()
        .map(|s| (s.clone(), 500u64))
        .collect();
    let hyper = PpoHyper {
        n_particles: 128,
        ..PpoHyper::default()
    };
    println!("preparing a guided agent and a forest model...");
    let (guided, _) = train_meta_ppo(&pairs, setup_fleet.horizon, 8192, &hyper, true, 1)?;
    let dataset: Vec<_> = setup_fleet
        .components
        .iter()
        .map(|s| (component_features(s), -100.0 / (s.weibull_scale * s.repair_cost as f64)))
        .collect();
    let model = train_forest(&dataset, &ForestConfig::default(), 2)?;

    let cfg = ScalingConfig {
        counts: vec![5, 10, 20, 40],
        repeats: 2,
        seed: 5,
        episodes_per_component: 3,
        budget_per_component: 500,
        n_particles: 128,
    };
    println!("timing stages over fleet sizes {:?}...\n", cfg.counts);
    let study = run_scaling_study(&cfg, &guided, &model)?;

    println!("{:<20} {:>6} {:>14} {:>12}", "stage", "n", "mean_seconds", "std");
    for row in &study.rows {
        println!(
            "{:<20} {:>6} {:>14.6} {:>12.6}",
            row.stage, row.n_components, row.mean_seconds, row.std_seconds
        );
    }
    println!();
    for (stage, slope) in &study.slopes {
        println!("{stage}: log-log slope {slope:.3}");
    }
    Ok(())
}
