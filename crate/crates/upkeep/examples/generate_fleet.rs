//! Generate a synthetic fleet and write it to a JSON file.
//!
//! ```bash
//! cargo run --example generate_fleet
//! ```

use upkeep::model::{generate_fleet, CostRanges, WeibullRanges};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut fleet = generate_fleet(8, 42, CostRanges::defaults(), WeibullRanges::defaults())?;
    fleet.total_budget = 4000;

    println!("fleet: {} components, budget {}, horizon {}", fleet.components.len(), fleet.total_budget, fleet.horizon);
    println!("{:<10} {:>8} {:>8} {:>8} {:>8}", "id", "shape", "scale", "repair", "inspect");
    for spec in &fleet.components {
        println!(
            "{:<10} {:>8.3} {:>8.2} {:>8} {:>8}",
            spec.id, spec.weibull_shape, spec.weibull_scale, spec.repair_cost, spec.inspect_cost
        );
    }

    let path = std::env::temp_dir().join("upkeep-example-fleet.json");
    fleet.save_json(&path)?;
    println!("\nwrote {}", path.display());

    // Round trip is exact.
    let loaded = upkeep::model::Fleet::load_json(&path)?;
    assert_eq!(fleet, loaded);
    println!("reloaded fleet matches bit for bit");
    Ok(())
}
