//! Reward delays.
//!
//! A [`DelayFunction`] maps a round's expected rewards to one delay per arm.
//! [`ExponentialDelaySampler`] provides the two exponential variants:
//!
//! * unbiased: one `Exponential(mean = scale)` draw shared by every arm;
//! * reward-dependent: per arm, a fast draw at `min_scale` and a slow draw
//!   at `max_scale` are interpolated by the arm's expected reward `p`, so
//!   `d = p·fast + (1 − p)·slow` and better arms report back sooner.
//!
//! Delays are rounded to the nearest whole round.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::seed::{rng_from_seed, SimRng};
use crate::{Result, SimError};

/// Produces per-arm delays (in rounds) for one environment round.
pub trait DelayFunction: Send {
    fn delays(&mut self, expected_rewards: &[f64]) -> Vec<u64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMode {
    Unbiased,
    RewardDependent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayConfig {
    pub mode: DelayMode,
    /// Mean delay of the unbiased sampler.
    pub scale: f64,
    /// Mean delay of a (near) certain reward in reward-dependent mode.
    pub min_scale: f64,
    /// Mean delay of a (near) hopeless arm in reward-dependent mode.
    pub max_scale: f64,
    pub seed: u64,
}

impl DelayConfig {
    pub fn unbiased(scale: f64, seed: u64) -> Self {
        Self { mode: DelayMode::Unbiased, scale, min_scale: scale, max_scale: scale, seed }
    }

    pub fn reward_dependent(min_scale: f64, max_scale: f64, seed: u64) -> Self {
        Self { mode: DelayMode::RewardDependent, scale: max_scale, min_scale, max_scale, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            DelayMode::Unbiased if !(self.scale > 0.0 && self.scale.is_finite()) => {
                Err(SimError::Config(format!("delay scale must be positive, got {}", self.scale)))
            }
            DelayMode::RewardDependent
                if !(self.min_scale > 0.0 && self.min_scale <= self.max_scale && self.max_scale.is_finite()) =>
            {
                Err(SimError::Config(format!(
                    "reward-dependent delay needs 0 < min_scale <= max_scale, got {} and {}",
                    self.min_scale, self.max_scale
                )))
            }
            _ => Ok(()),
        }
    }
}

fn exponential<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    mean * rng.sample::<f64, _>(Exp1)
}

fn to_rounds(d: f64) -> u64 {
    d.round().max(0.0) as u64
}

/// One shared exponential draw, replicated for every arm.
pub fn sample_unbiased<R: Rng + ?Sized>(n_actions: usize, scale: f64, rng: &mut R) -> Vec<u64> {
    vec![to_rounds(exponential(scale, rng)); n_actions]
}

/// Independent per-arm draws interpolated by each arm's expected reward.
pub fn sample_reward_dependent<R: Rng + ?Sized>(
    expected_rewards: &[f64],
    min_scale: f64,
    max_scale: f64,
    rng: &mut R,
) -> Vec<u64> {
    expected_rewards
        .iter()
        .map(|&p| {
            let fast = exponential(min_scale, rng);
            let slow = exponential(max_scale, rng);
            to_rounds(p * fast + (1.0 - p) * slow)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExponentialDelaySampler {
    config: DelayConfig,
    rng: SimRng,
}

impl ExponentialDelaySampler {
    pub fn new(config: DelayConfig) -> Result<Self> {
        config.validate()?;
        let rng = rng_from_seed(config.seed);
        Ok(Self { config, rng })
    }

    pub fn config(&self) -> &DelayConfig {
        &self.config
    }
}

impl DelayFunction for ExponentialDelaySampler {
    fn delays(&mut self, expected_rewards: &[f64]) -> Vec<u64> {
        match self.config.mode {
            DelayMode::Unbiased => sample_unbiased(expected_rewards.len(), self.config.scale, &mut self.rng),
            DelayMode::RewardDependent => sample_reward_dependent(
                expected_rewards,
                self.config.min_scale,
                self.config.max_scale,
                &mut self.rng,
            ),
        }
    }
}

/// The same delay for every arm on every round.
#[derive(Debug, Clone, Copy)]
pub struct ConstantDelay(pub u64);

impl DelayFunction for ConstantDelay {
    fn delays(&mut self, expected_rewards: &[f64]) -> Vec<u64> {
        vec![self.0; expected_rewards.len()]
    }
}
