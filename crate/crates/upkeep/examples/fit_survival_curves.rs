//! Fit survival-versus-budget curves for a few components from simulated
//! episodes and write the curve table.
//!
//! ```bash
//! cargo run --release --example fit_survival_curves
//! ```

use upkeep::bench::{fit_fleet_curves, CurveFitConfig, CurveFitPolicy};
use upkeep::model::{generate_fleet, CostRanges, WeibullRanges};
use upkeep::survival::{write_curve_csv, CurveSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fleet = generate_fleet(
        4,
        5,
        CostRanges::defaults(),
        WeibullRanges {
            scale_lo: 25.0,
            scale_hi: 70.0,
            ..WeibullRanges::defaults()
        },
    )?;

    let cfg = CurveFitConfig {
        budget_grid: (0..=10).map(|i| i * 500).collect(),
        runs: 25,
        seed: 7,
        n_particles: 512,
    };
    println!(
        "fitting curves from {} budget levels x {} runs per component...",
        cfg.budget_grid.len(),
        cfg.runs
    );
    let curves = fit_fleet_curves(&fleet, &cfg, None, CurveFitPolicy::Oracle)?;

    println!("\n{:<10} {:>9} {:>12} {:>7}", "id", "alpha", "beta", "gamma");
    for c in &curves {
        println!(
            "{:<10} {:>9.2} {:>12.6} {:>7.1}",
            c.component_id, c.alpha, c.beta, c.gamma
        );
        println!(
            "           T(0) = {:>6.1}   T(1000) = {:>6.1}   T(5000) = {:>6.1}",
            c.evaluate(0.0),
            c.evaluate(1000.0),
            c.evaluate(5000.0)
        );
    }

    let path = std::env::temp_dir().join("upkeep-example-curves.csv");
    let rows: Vec<_> = curves.into_iter().map(|c| (c, CurveSource::Fitted)).collect();
    write_curve_csv(&path, &rows)?;
    println!("\nwrote {}", path.display());
    Ok(())
}
