//! Off-policy learning from logged bandit feedback.
//!
//! [`fit_ipw`] turns a behaviour log into a deterministic policy by
//! reward-weighted multiclass classification: every row votes for its logged
//! action with weight `min(reward / propensity, weight_clip)`. Propensities
//! are either the logged ones or predictions of a propensity model trained
//! with [`fit_propensity`]. [`evaluate_ground_truth`] scores any policy on
//! the simulator's full reward information.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::EnvironmentRound;
use crate::policies::{ActionChoice, Policy};
use crate::seed::{rng_from_seed, sub_seed};
use crate::{Result, SimError};

mod model;

pub use model::{floor_and_renormalize, MulticlassLinearModel};
use model::{train_weighted, TrainSettings};

/// One row of logged bandit feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedInteraction {
    pub round_index: u64,
    pub context: Vec<f64>,
    pub action: usize,
    pub reward: u8,
    pub logged_propensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpwConfig {
    pub use_true_propensities: bool,
    pub weight_clip: f64,
    pub propensity_floor: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for IpwConfig {
    fn default() -> Self {
        Self {
            use_true_propensities: false,
            weight_clip: 100.0,
            propensity_floor: 1e-3,
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 256,
            seed: 0,
        }
    }
}

impl IpwConfig {
    pub fn validate(&self) -> Result<()> {
        // Written this way so NaN is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.weight_clip > 0.0) {
            return Err(SimError::Config(format!("weight_clip must be positive, got {}", self.weight_clip)));
        }
        if !(self.propensity_floor > 0.0 && self.propensity_floor < 1.0) {
            return Err(SimError::Config(format!(
                "propensity_floor must lie in (0, 1), got {}",
                self.propensity_floor
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SimError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(SimError::Config("epochs and batch_size must be positive".into()));
        }
        Ok(())
    }

    fn settings(&self, stream: u64) -> TrainSettings {
        TrainSettings {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: sub_seed(self.seed, stream),
        }
    }
}

const PROPENSITY_STREAM: u64 = 0;
const IPW_STREAM: u64 = 1;

fn check_log(log: &[LoggedInteraction], n_actions: usize) -> Result<usize> {
    let first = log.first().ok_or(SimError::EmptyLog)?;
    let dim = first.context.len();
    for row in log {
        if row.context.len() != dim {
            return Err(SimError::DimensionMismatch { expected: dim, got: row.context.len() });
        }
        if row.action >= n_actions {
            return Err(SimError::ActionOutOfRange { action: row.action, n_actions });
        }
        if row.reward > 1 {
            return Err(SimError::InvalidReward(row.reward));
        }
    }
    Ok(dim)
}

/// Multinomial logistic model of the logging policy, `π̂(a | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    model: MulticlassLinearModel,
    floor: f64,
}

impl PropensityModel {
    pub fn model(&self) -> &MulticlassLinearModel {
        &self.model
    }

    /// Floored, renormalised action probabilities for `context`.
    pub fn probabilities(&self, context: &[f64]) -> Vec<f64> {
        floor_and_renormalize(&self.model.probabilities(context), self.floor)
    }

    pub fn propensity(&self, context: &[f64], action: usize) -> f64 {
        self.probabilities(context)[action]
    }
}

/// Fits `π̂(a | x)` to the logged actions.
pub fn fit_propensity(log: &[LoggedInteraction], n_actions: usize, config: &IpwConfig) -> Result<PropensityModel> {
    config.validate()?;
    let dim = check_log(log, n_actions)?;
    let first = log[0].action;
    if log.iter().all(|r| r.action == first) {
        return Err(SimError::DegenerateLog);
    }
    let contexts: Vec<&[f64]> = log.iter().map(|r| r.context.as_slice()).collect();
    let labels: Vec<usize> = log.iter().map(|r| r.action).collect();
    let model = train_weighted(
        &contexts,
        &labels,
        &vec![1.0; log.len()],
        n_actions,
        dim,
        config.settings(PROPENSITY_STREAM),
    );
    Ok(PropensityModel { model, floor: config.propensity_floor })
}

/// `min(reward / propensity, clip)`.
pub fn ipw_weight(reward: u8, propensity: f64, clip: f64) -> f64 {
    (reward as f64 / propensity).min(clip)
}

/// Per-row IPW weights; fails on any non-positive propensity.
pub fn ipw_weights(log: &[LoggedInteraction], propensities: &[f64], clip: f64) -> Result<Vec<f64>> {
    if propensities.len() != log.len() {
        return Err(SimError::DimensionMismatch { expected: log.len(), got: propensities.len() });
    }
    log.iter()
        .zip(propensities)
        .enumerate()
        .map(|(row, (r, &p))| {
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(p > 0.0) {
                Err(SimError::NonPositivePropensity { row, value: p })
            } else {
                Ok(ipw_weight(r.reward, p, clip))
            }
        })
        .collect()
}

/// IPW estimate of the value of the deterministic rule `policy`:
/// `Σ w_i · 1[policy(x_i) = a_i] / n`.
pub fn ipw_objective<F>(log: &[LoggedInteraction], weights: &[f64], mut policy: F) -> f64
where
    F: FnMut(&[f64]) -> usize,
{
    let total: f64 = log
        .iter()
        .zip(weights)
        .filter(|(r, _)| policy(&r.context) == r.action)
        .map(|(_, w)| w)
        .sum();
    total / log.len() as f64
}

/// The propensities IPW training should use, per `config.use_true_propensities`.
pub fn training_propensities(log: &[LoggedInteraction], n_actions: usize, config: &IpwConfig) -> Result<Vec<f64>> {
    if config.use_true_propensities {
        return Ok(log.iter().map(|r| r.logged_propensity).collect());
    }
    let model = fit_propensity(log, n_actions, config)?;
    Ok(log.iter().map(|r| model.propensity(&r.context, r.action)).collect())
}

/// Deterministic policy derived from an IPW-trained classifier. It never
/// learns online.
#[derive(Debug, Clone, PartialEq)]
pub struct IpwPolicy {
    model: MulticlassLinearModel,
}

impl IpwPolicy {
    pub fn new(model: MulticlassLinearModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &MulticlassLinearModel {
        &self.model
    }

    pub fn predict(&self, context: &[f64]) -> usize {
        self.model.predict(context)
    }
}

impl Policy for IpwPolicy {
    fn n_actions(&self) -> usize {
        self.model.n_actions()
    }

    fn select(&mut self, context: &[f64], _rng: &mut dyn RngCore) -> Result<ActionChoice> {
        if context.len() != self.model.dim_context() {
            return Err(SimError::DimensionMismatch { expected: self.model.dim_context(), got: context.len() });
        }
        Ok(ActionChoice { action: self.model.predict(context), propensity: 1.0 })
    }

    fn update(&mut self, _context: &[f64], _action: usize, _reward: u8) -> Result<()> {
        Ok(())
    }
}

/// Trains the IPW classifier on `log` with the given per-row propensities.
pub fn fit_ipw(
    log: &[LoggedInteraction],
    propensities: &[f64],
    n_actions: usize,
    config: &IpwConfig,
) -> Result<IpwPolicy> {
    config.validate()?;
    let dim = check_log(log, n_actions)?;
    let weights = ipw_weights(log, propensities, config.weight_clip)?;
    let contexts: Vec<&[f64]> = log.iter().map(|r| r.context.as_slice()).collect();
    let labels: Vec<usize> = log.iter().map(|r| r.action).collect();
    let model = train_weighted(&contexts, &labels, &weights, n_actions, dim, config.settings(IPW_STREAM));
    Ok(IpwPolicy::new(model))
}

/// Mean expected reward of the policy's choices over `rounds`. The policy
/// is never updated; stochastic policies draw from a stream seeded by `seed`.
pub fn evaluate_ground_truth<P: Policy + ?Sized>(policy: &mut P, rounds: &[EnvironmentRound], seed: u64) -> Result<f64> {
    if rounds.is_empty() {
        return Err(SimError::Config("cannot evaluate on zero rounds".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut total = 0.0;
    for round in rounds {
        let choice = policy.select(&round.context, &mut rng)?;
        let p = round
            .expected_rewards
            .get(choice.action)
            .ok_or(SimError::ActionOutOfRange { action: choice.action, n_actions: round.n_actions() })?;
        total += p;
    }
    Ok(total / rounds.len() as f64)
}
