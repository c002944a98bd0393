//! Split a shared budget across heterogeneous survival curves three ways:
//! exact water-filling, the brute-force grid oracle, and the proportional
//! baseline.
//!
//! ```bash
//! cargo run --example allocate_budget
//! ```

use upkeep::alloc::{allocate_bruteforce, allocate_kkt, allocate_proportional, verify_kkt};
use upkeep::model::ComponentSpec;
use upkeep::survival::SurvivalCurve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let curves = vec![
        SurvivalCurve::new("roof-01", -80.0, -0.0030, 100.0)?,
        SurvivalCurve::new("chiller-02", -60.0, -0.0012, 100.0)?,
        SurvivalCurve::new("lights-03", -25.0, -0.0008, 100.0)?,
        SurvivalCurve::new("fountain-04", -45.0, -0.0020, 100.0)?,
    ];
    let budget = 2000;

    let kkt = allocate_kkt(&curves, budget, 1e-9)?;
    verify_kkt(&curves, &kkt, 1e-6).expect("optimality certificate");
    let dp = allocate_bruteforce(&curves, budget, 10)?;

    let specs: Vec<ComponentSpec> = curves
        .iter()
        .enumerate()
        .map(|(i, c)| ComponentSpec::new(c.component_id.clone(), 1.5, 40.0 + 10.0 * i as f64, 150, 3))
        .collect::<Result<_, _>>()?;
    let lifetimes: Vec<f64> = specs.iter().map(|s| s.weibull_scale).collect();
    let proportional = allocate_proportional(&specs, &lifetimes, budget)?;

    println!("budget {budget} over {} components\n", curves.len());
    println!(
        "{:<12} {:>10} {:>12} {:>14}",
        "component", "kkt", "bruteforce", "proportional"
    );
    for (i, c) in curves.iter().enumerate() {
        println!(
            "{:<12} {:>10} {:>12} {:>14}",
            c.component_id, kkt.budgets[i], dp.budgets[i], proportional.budgets[i]
        );
    }
    println!(
        "\npredicted total survival: kkt {:.3}, bruteforce {:.3}",
        kkt.objective_estimate, dp.objective_estimate
    );
    println!(
        "kkt multiplier (equalized marginal value): {:.6}",
        kkt.multiplier.unwrap()
    );
    Ok(())
}
