//! Contextual-bandit simulation engine.
//!
//! The crate is organised around the life of a simulated experiment:
//!
//! * [`env`] generates rounds of contexts, expected rewards and sampled
//!   binary rewards through a per-arm logistic model.
//! * [`drift`] moves the reward coefficients over time (sudden,
//!   incremental, gradual and seasonal concept drift).
//! * [`delay`] attaches per-arm reward delays to each round.
//! * [`policies`] holds the on-policy bandit algorithms.
//! * [`sim`] iterates a policy over rounds, deferring updates while
//!   feedback is delayed, and records the behaviour log.
//! * [`offpolicy`] trains propensity and IPW models from logged feedback
//!   and evaluates policies against simulator ground truth.
//! * [`cli`] is the config-driven experiment runner behind the
//!   `bandit-sim` binary.

pub mod cli;
pub mod delay;
pub mod drift;
pub mod env;
mod error;
pub mod offpolicy;
pub mod policies;
pub mod seed;
pub mod sim;
pub mod stats;

pub use error::{Result, SimError};
