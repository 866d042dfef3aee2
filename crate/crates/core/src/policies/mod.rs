//! On-policy bandit algorithms.
//!
//! Every policy reports the probability with which it chose its action, so
//! its behaviour log can later be debiased by inverse propensity weighting.
//! Propensities are exact for the random and ε-greedy policies and Monte
//! Carlo estimates for the two Thompson samplers. All ties go to the lowest
//! arm index.

use rand::RngCore;

use crate::{Result, SimError};

mod egreedy;
mod linear;
mod random;
mod thompson;

pub use egreedy::EpsilonGreedy;
pub use linear::{LinTs, LinUcb, LinearPolicyState};
pub use random::RandomPolicy;
pub use thompson::BernoulliTs;

/// A selected arm and the probability the policy had of selecting it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionChoice {
    pub action: usize,
    pub propensity: f64,
}

/// Common interface of every bandit policy.
pub trait Policy: Send {
    fn n_actions(&self) -> usize;

    fn select(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<ActionChoice>;

    /// Learns from one observed reward. Policies that do not learn ignore it.
    fn update(&mut self, context: &[f64], action: usize, reward: u8) -> Result<()>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn n_actions(&self) -> usize {
        (**self).n_actions()
    }

    fn select(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<ActionChoice> {
        (**self).select(context, rng)
    }

    fn update(&mut self, context: &[f64], action: usize, reward: u8) -> Result<()> {
        (**self).update(context, action, reward)
    }
}

/// Settings for Monte Carlo propensity estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPropensity {
    pub n_resamples: usize,
    pub floor: f64,
}

impl Default for McPropensity {
    fn default() -> Self {
        Self { n_resamples: 200, floor: 1e-3 }
    }
}

impl McPropensity {
    /// Floored frequency of `hits` among the resamples.
    pub(crate) fn estimate(&self, hits: usize) -> f64 {
        (hits as f64 / self.n_resamples as f64).clamp(self.floor, 1.0)
    }

    fn validate(&self) -> Result<()> {
        if self.n_resamples == 0 {
            return Err(SimError::Config("n_resamples must be positive".into()));
        }
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return Err(SimError::Config(format!("propensity_floor must lie in (0, 1), got {}", self.floor)));
        }
        Ok(())
    }
}

/// Declarative description of a policy, used by the experiment runner.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Random,
    EpsilonGreedy { epsilon: f64 },
    BernoulliTs { prior_alpha: f64, prior_beta: f64, mc: McPropensity },
    LinUcb { alpha: f64, lambda_reg: f64 },
    LinTs { v: f64, lambda_reg: f64, mc: McPropensity },
}

impl PolicySpec {
    pub const NAMES: [&'static str; 5] = ["random", "egreedy", "bts", "linucb", "lints"];

    /// Default hyperparameters for a policy name.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "random" => Self::Random,
            "egreedy" => Self::EpsilonGreedy { epsilon: 0.1 },
            "bts" => Self::BernoulliTs { prior_alpha: 1.0, prior_beta: 1.0, mc: McPropensity::default() },
            "linucb" => Self::LinUcb { alpha: 1.0, lambda_reg: 1.0 },
            "lints" => Self::LinTs { v: 1.0, lambda_reg: 1.0, mc: McPropensity::default() },
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::EpsilonGreedy { .. } => "egreedy",
            Self::BernoulliTs { .. } => "bts",
            Self::LinUcb { .. } => "linucb",
            Self::LinTs { .. } => "lints",
        }
    }

    pub fn build(&self, n_actions: usize, dim_context: usize) -> Result<Box<dyn Policy>> {
        Ok(match *self {
            Self::Random => Box::new(RandomPolicy::new(n_actions)?),
            Self::EpsilonGreedy { epsilon } => Box::new(EpsilonGreedy::new(n_actions, epsilon)?),
            Self::BernoulliTs { prior_alpha, prior_beta, mc } => {
                Box::new(BernoulliTs::with_prior(n_actions, prior_alpha, prior_beta, mc)?)
            }
            Self::LinUcb { alpha, lambda_reg } => Box::new(LinUcb::new(n_actions, dim_context, lambda_reg, alpha)?),
            Self::LinTs { v, lambda_reg, mc } => Box::new(LinTs::new(n_actions, dim_context, lambda_reg, v, mc)?),
        })
    }
}

/// Index of the largest score; ties go to the lowest index.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_action(action: usize, n_actions: usize) -> Result<()> {
    if action >= n_actions {
        return Err(SimError::ActionOutOfRange { action, n_actions });
    }
    Ok(())
}

pub(crate) fn check_reward(reward: u8) -> Result<()> {
    if reward > 1 {
        return Err(SimError::InvalidReward(reward));
    }
    Ok(())
}

pub(crate) fn check_n_actions(n_actions: usize) -> Result<()> {
    if n_actions < 2 {
        return Err(SimError::Config(format!("policies need at least 2 actions, got {n_actions}")));
    }
    Ok(())
}
