//! Train the random-forest regressor that predicts the curve parameter
//! `beta` from component features, and score it on held-out components.
//!
//! ```bash
//! cargo run --release --example forest_regression
//! ```

use upkeep::bench::{fit_fleet_curves, CurveFitConfig, CurveFitPolicy};
use upkeep::model::{generate_fleet, CostRanges, WeibullRanges};
use upkeep::survival::forest::{component_features, predict_beta, r_squared};
use upkeep::survival::{train_forest, ForestConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // One fleet supplies both halves of the split.
    let fleet = generate_fleet(
        50,
        31,
        CostRanges::defaults(),
        WeibullRanges {
            scale_lo: 20.0,
            scale_hi: 80.0,
            ..WeibullRanges::defaults()
        },
    )?;
    let cfg = CurveFitConfig {
        budget_grid: (0..=10).map(|i| i * 500).collect(),
        runs: 25,
        seed: 13,
        n_particles: 256,
    };
    println!("fitting beta targets for {} components...", fleet.components.len());
    let curves = fit_fleet_curves(
        &fleet,
        &cfg,
        None,
        CurveFitPolicy::Heuristic {
            interval: 5,
            threshold: 15,
        },
    )?;

    let rows: Vec<_> = fleet
        .components
        .iter()
        .zip(&curves)
        .map(|(spec, curve)| (component_features(spec), curve.beta))
        .collect();
    let split = rows.len() * 4 / 5;
    let (train, test) = rows.split_at(split);

    let model = train_forest(train, &ForestConfig::default(), 1)?;
    let predicted: Vec<f64> = fleet.components[split..]
        .iter()
        .map(|spec| predict_beta(&model, spec))
        .collect();
    let actual: Vec<f64> = test.iter().map(|(_, beta)| *beta).collect();

    println!("\n{:>12} {:>12}", "fitted", "predicted");
    for (a, p) in actual.iter().zip(&predicted) {
        println!("{a:>12.6} {p:>12.6}");
    }
    println!(
        "\nheld-out R^2 over {} components: {:.3}",
        test.len(),
        r_squared(&predicted, &actual)
    );

    let path = std::env::temp_dir().join("upkeep-example-forest.json");
    model.save(&path)?;
    println!("model saved to {}", path.display());
    Ok(())
}
