//! Bandit-driven server selection for mobile edge computing offloading.
//!
//! - [`env`]: doubly-stochastic multi-server environment with counterfactual
//!   per-arm delays and rewards.
//! - [`policies`]: Sisyphus (SSPH), Thompson sampling and its discounted and
//!   optimistic variants, discounted UCB, plus oracle and random references.
//! - [`harness`]: seeded episodes, normalized regret and latency, sweeps.
//! - [`experiment`]: configuration schema and CSV output for the CLI.

pub mod env;
pub mod experiment;
pub mod harness;
pub mod policies;
pub mod seeding;
