//! Meta-train a small oracle-guided agent over a few (component, budget)
//! pairs, then compare its greedy performance against the oracle bound.
//!
//! ```bash
//! cargo run --release --example train_guided_agent
//! ```

use upkeep::agent::{
    save_checkpoint, train_meta_ppo, ActMode, CheckpointMeta, GuidedDecision, PpoHyper,
};
use upkeep::model::{generate_fleet, CostRanges, WeibullRanges};
use upkeep::oracle::{build_oracle, OracleDecision, OracleLimits};
use upkeep::sim::{run_episode, ComponentEnv, EpisodeOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fleet = generate_fleet(
        3,
        21,
        CostRanges::defaults(),
        WeibullRanges {
            scale_lo: 30.0,
            scale_hi: 70.0,
            ..WeibullRanges::defaults()
        },
    )?;
    let horizon = fleet.horizon;
    let pairs: Vec<_> = fleet
        .components
        .iter()
        .flat_map(|spec| [500u64, 1500].map(|b| (spec.clone(), b)))
        .collect();

    let hyper = PpoHyper {
        n_particles: 256,
        ..PpoHyper::default()
    };
    let steps = 50_000;
    println!("training on {} pairs for {steps} steps...", pairs.len());
    let (params, log) = train_meta_ppo(&pairs, horizon, steps, &hyper, true, 3)?;
    for row in log.rows.iter().rev().take(3).rev() {
        println!(
            "  step {:>6}: mean reward {:>7.2}, mean survival {:>5.1}",
            row.step, row.mean_episode_reward, row.mean_survival
        );
    }

    // Held-out comparison against the oracle on one training pair.
    let (spec, budget) = &pairs[0];
    let oracle = build_oracle(spec, *budget, horizon, &OracleLimits::default())?;
    let env = ComponentEnv::new(spec.clone(), horizon)?;
    let opts = EpisodeOptions::default();
    let (mut oracle_mean, mut agent_mean) = (0.0, 0.0);
    let runs = 50;
    for seed in 1000..1000 + runs {
        let mut oracle_driver = OracleDecision::new(&oracle);
        oracle_mean += f64::from(run_episode(&env, *budget, &mut oracle_driver, seed, &opts)?.survival_time);
        let mut agent_driver = GuidedDecision::new(&params, &oracle, ActMode::Greedy);
        agent_mean += f64::from(run_episode(&env, *budget, &mut agent_driver, seed, &opts)?.survival_time);
    }
    oracle_mean /= f64::from(runs as u32);
    agent_mean /= f64::from(runs as u32);
    println!(
        "\nheld-out mean survival on {} at budget {budget}: oracle {oracle_mean:.1}, guided agent {agent_mean:.1}",
        spec.id
    );

    let path = std::env::temp_dir().join("upkeep-example-guided.ckpt.json");
    save_checkpoint(
        &path,
        &params,
        &hyper,
        &CheckpointMeta {
            seed: 3,
            total_steps: steps,
            guided: true,
        },
    )?;
    println!("checkpoint saved to {}", path.display());
    Ok(())
}
