//! Track a particle belief against the hidden condition over one episode:
//! the belief drifts between inspections and snaps to the truth at each one.
//!
//! ```bash
//! cargo run --example belief_tracking
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use upkeep::belief::{correct, init_belief, predict};
use upkeep::model::{ActionKind, ComponentSpec};
use upkeep::sim::ComponentEnv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ComponentSpec::new("fan-12", 1.5, 50.0, 150, 2)?;
    let env = ComponentEnv::new(spec.clone(), 40)?;
    let kernel = env.kernel();

    let mut env_rng = ChaCha8Rng::seed_from_u64(11);
    let mut belief_rng = ChaCha8Rng::seed_from_u64(12);
    let mut state = env.initial_state(10_000);
    let mut belief = init_belief(&spec, 2048);

    println!(
        "{:>4} {:>8} {:>6} {:>12} {:>12}",
        "step", "action", "truth", "belief_mean", "belief_var"
    );
    for step in 0..40 {
        // Inspect every 8 steps, otherwise drift.
        let action = if step % 8 == 7 {
            ActionKind::Inspect
        } else {
            ActionKind::Degrade
        };
        let (next, obs) = env.step(&state, action, &mut env_rng)?;
        belief = predict(&belief, action, kernel, &spec, &mut belief_rng);
        belief = correct(&belief, &obs);
        println!(
            "{:>4} {:>8} {:>6} {:>12.2} {:>12.2}",
            next.step,
            action.name(),
            next.condition,
            belief.mean(),
            belief.variance()
        );
        if action == ActionKind::Inspect {
            assert_eq!(belief.mean(), f64::from(next.condition));
            assert_eq!(belief.variance(), 0.0);
        }
        state = next;
    }
    println!("\nevery inspection collapsed the belief onto the true condition");
    Ok(())
}
