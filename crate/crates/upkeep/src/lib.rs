//! Budget-constrained maintenance planning for fleets of deteriorating
//! components.
//!
//! A fleet of components deteriorates stochastically; each component's health
//! is a partially observable integer condition index that only an explicit
//! (priced) inspection reveals, and a repair restores it. All components draw
//! on one shared maintenance budget. This crate plans for that setting in two
//! steps:
//!
//! 1. **Budget split.** Per-component survival-versus-budget curves of the
//!    form `alpha * exp(beta * b) + gamma` are fitted from simulation, a
//!    random-forest regressor predicts the curve parameter `beta` from
//!    component features, and the shared budget is split by concave
//!    water-filling ([`alloc`]).
//! 2. **Per-component control.** Each component is driven by an
//!    oracle-guided agent: a small policy network decides only whether to
//!    inspect, and otherwise defers to the exact value-iteration policy of
//!    the fully observable companion problem ([`oracle`], [`agent`]).
//!
//! The crate is a library first: the `examples/` directory contains one
//! runnable example per capability (fleet generation, episode simulation,
//! belief tracking, oracle policies, agent training, curve fitting, forest
//! regression, budget allocation, policy comparison, scaling study). A thin
//! `upkeep` binary exposes the same pipeline as subcommands.
//!
//! Determinism: every stochastic routine takes an explicit seed, sub-streams
//! are derived with [`seeding::derive_seed`], and repeated runs with the same
//! configuration produce identical artifacts.

pub mod agent;
pub mod alloc;
pub mod belief;
pub mod bench;
pub mod manifest;
pub mod model;
pub mod oracle;
pub mod seeding;
pub mod sim;
pub mod survival;

pub use model::{
    ActionKind, AllocationResult, ComponentSpec, CostRanges, DecayKernel, Fleet, WeibullRanges,
};
