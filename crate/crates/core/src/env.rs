//! Synthetic bandit environment.
//!
//! Each round draws a standard-normal context, computes every arm's expected
//! reward through a logistic link on `context · θ_a + β_a`, samples one
//! Bernoulli reward per arm and, when a delay function is configured,
//! attaches per-arm delays.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::delay::{DelayConfig, DelayFunction, ExponentialDelaySampler};
use crate::drift::{CoefficientDrifter, DrifterConfig};
use crate::seed::{rng_from_seed, sub_seed, SimRng};
use crate::{Result, SimError};

/// Smallest distance kept between an expected reward and 0 or 1.
///
/// `sigmoid` saturates to exactly 1.0 in f64 for logits above ~37.
pub const PROBABILITY_MARGIN: f64 = 1e-12;

/// Logistic function, evaluated without overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-arm reward coefficients: a weight row `θ_a` over the context and an
/// arm intercept `β_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    n_actions: usize,
    dim_context: usize,
    theta: Vec<f64>,
    intercepts: Vec<f64>,
}

impl CoefficientSet {
    /// Builds a set from weight rows, with all intercepts zero.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let intercepts = vec![0.0; rows.len()];
        Self::from_rows_and_intercepts(rows, &intercepts)
    }

    pub fn from_rows_and_intercepts(rows: &[Vec<f64>], intercepts: &[f64]) -> Result<Self> {
        let n_actions = rows.len();
        if n_actions == 0 {
            return Err(SimError::Config("coefficient set needs at least one arm".into()));
        }
        if intercepts.len() != n_actions {
            return Err(SimError::DimensionMismatch { expected: n_actions, got: intercepts.len() });
        }
        let dim_context = rows[0].len();
        if dim_context == 0 {
            return Err(SimError::Config("coefficient rows must be non-empty".into()));
        }
        let mut theta = Vec::with_capacity(n_actions * dim_context);
        for row in rows {
            if row.len() != dim_context {
                return Err(SimError::DimensionMismatch { expected: dim_context, got: row.len() });
            }
            theta.extend_from_slice(row);
        }
        let set = Self { n_actions, dim_context, theta, intercepts: intercepts.to_vec() };
        if !set.is_finite() {
            return Err(SimError::Config("coefficients must be finite".into()));
        }
        Ok(set)
    }

    pub fn zeros(n_actions: usize, dim_context: usize) -> Self {
        Self {
            n_actions,
            dim_context,
            theta: vec![0.0; n_actions * dim_context],
            intercepts: vec![0.0; n_actions],
        }
    }

    /// Draws weights i.i.d. `N(0, coefficient_scale²)` and intercepts
    /// i.i.d. `N(0, intercept_scale²)`.
    pub fn sample<R: Rng + ?Sized>(
        n_actions: usize,
        dim_context: usize,
        coefficient_scale: f64,
        intercept_scale: f64,
        rng: &mut R,
    ) -> Self {
        let theta = (0..n_actions * dim_context)
            .map(|_| coefficient_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let intercepts = (0..n_actions)
            .map(|_| intercept_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { n_actions, dim_context, theta, intercepts }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dim_context(&self) -> usize {
        self.dim_context
    }

    pub fn row(&self, action: usize) -> &[f64] {
        &self.theta[action * self.dim_context..(action + 1) * self.dim_context]
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.intercepts).all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_actions == other.n_actions && self.dim_context == other.dim_context
    }

    /// Elementwise `(1 − λ)·self + λ·other`.
    pub fn lerp(&self, other: &Self, lambda: f64) -> Self {
        debug_assert!(self.same_shape(other));
        let mix = |a: &f64, b: &f64| (1.0 - lambda) * a + lambda * b;
        Self {
            n_actions: self.n_actions,
            dim_context: self.dim_context,
            theta: self.theta.iter().zip(&other.theta).map(|(a, b)| mix(a, b)).collect(),
            intercepts: self.intercepts.iter().zip(&other.intercepts).map(|(a, b)| mix(a, b)).collect(),
        }
    }

    /// Arm logits `context · θ_a + β_a`.
    pub fn logits(&self, context: &[f64]) -> Result<Vec<f64>> {
        if context.len() != self.dim_context {
            return Err(SimError::DimensionMismatch { expected: self.dim_context, got: context.len() });
        }
        Ok((0..self.n_actions)
            .map(|a| dot(context, self.row(a)) + self.intercepts[a])
            .collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Expected reward of every arm for `context`, kept inside
/// `[PROBABILITY_MARGIN, 1 − PROBABILITY_MARGIN]`.
pub fn expected_rewards(context: &[f64], coefficients: &CoefficientSet) -> Result<Vec<f64>> {
    Ok(coefficients
        .logits(context)?
        .into_iter()
        .map(|z| sigmoid(z).clamp(PROBABILITY_MARGIN, 1.0 - PROBABILITY_MARGIN))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentConfig {
    pub n_actions: usize,
    pub dim_context: usize,
    pub seed: u64,
    /// Standard deviation of the weight entries; `None` means `1/sqrt(dim_context)`.
    pub coefficient_scale: Option<f64>,
    /// Standard deviation of the arm intercepts.
    pub intercept_scale: f64,
    pub delay: Option<DelayConfig>,
    pub drift: Option<DrifterConfig>,
}

impl EnvironmentConfig {
    pub const DEFAULT_INTERCEPT_SCALE: f64 = 1.0;

    pub fn new(n_actions: usize, dim_context: usize, seed: u64) -> Self {
        Self {
            n_actions,
            dim_context,
            seed,
            coefficient_scale: None,
            intercept_scale: Self::DEFAULT_INTERCEPT_SCALE,
            delay: None,
            drift: None,
        }
    }

    pub fn coefficient_scale(&self) -> f64 {
        self.coefficient_scale
            .unwrap_or_else(|| 1.0 / (self.dim_context.max(1) as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_actions < 2 {
            return Err(SimError::Config(format!("n_actions must be at least 2, got {}", self.n_actions)));
        }
        if self.dim_context < 1 {
            return Err(SimError::Config("dim_context must be at least 1".into()));
        }
        let scale = self.coefficient_scale();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(SimError::Config(format!("coefficient_scale must be positive, got {scale}")));
        }
        if !(self.intercept_scale >= 0.0 && self.intercept_scale.is_finite()) {
            return Err(SimError::Config(format!(
                "intercept_scale must be non-negative, got {}",
                self.intercept_scale
            )));
        }
        if let Some(delay) = &self.delay {
            delay.validate()?;
        }
        if let Some(drift) = &self.drift {
            drift.validate()?;
        }
        Ok(())
    }
}

/// One simulation step with full reward information for every arm.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentRound {
    pub round_index: u64,
    pub context: Vec<f64>,
    pub expected_rewards: Vec<f64>,
    pub rewards: Vec<u8>,
    pub delay_rounds: Option<Vec<u64>>,
}

impl EnvironmentRound {
    pub fn n_actions(&self) -> usize {
        self.expected_rewards.len()
    }

    pub fn max_expected_reward(&self) -> f64 {
        self.expected_rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Sub-stream numbers under the environment seed.
const CONTEXT_STREAM: u64 = 0;
const COEFFICIENT_STREAM: u64 = 1;

/// Generator of [`EnvironmentRound`]s.
///
/// Contexts and rewards, the initial coefficients, the drifter and the delay
/// sampler each draw from their own seeded stream, so switching drift or
/// delay on or off leaves the context/reward sequence untouched.
pub struct BanditEnvironment {
    n_actions: usize,
    dim_context: usize,
    base: CoefficientSet,
    drifter: Option<CoefficientDrifter>,
    delay: Option<Box<dyn DelayFunction>>,
    rng: SimRng,
    next_round: u64,
}

impl std::fmt::Debug for BanditEnvironment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BanditEnvironment")
            .field("n_actions", &self.n_actions)
            .field("dim_context", &self.dim_context)
            .field("drift", &self.drifter.is_some())
            .field("delay", &self.delay.is_some())
            .field("next_round", &self.next_round)
            .finish()
    }
}

impl BanditEnvironment {
    pub fn new(config: &EnvironmentConfig) -> Result<Self> {
        config.validate()?;
        let mut coefficient_rng = rng_from_seed(sub_seed(config.seed, COEFFICIENT_STREAM));
        let base = CoefficientSet::sample(
            config.n_actions,
            config.dim_context,
            config.coefficient_scale(),
            config.intercept_scale,
            &mut coefficient_rng,
        );
        let mut env = Self::with_coefficients(config.seed, base)?;
        if let Some(drift) = &config.drift {
            env.drifter = Some(CoefficientDrifter::new(
                drift.clone(),
                env.base.clone(),
                config.coefficient_scale(),
                config.intercept_scale,
            )?);
        }
        if let Some(delay) = &config.delay {
            env.delay = Some(Box::new(ExponentialDelaySampler::new(delay.clone())?));
        }
        Ok(env)
    }

    /// Environment with fixed, caller-provided coefficients and no drift or delay.
    pub fn with_coefficients(seed: u64, coefficients: CoefficientSet) -> Result<Self> {
        if !coefficients.is_finite() {
            return Err(SimError::Config("coefficients must be finite".into()));
        }
        Ok(Self {
            n_actions: coefficients.n_actions(),
            dim_context: coefficients.dim_context(),
            base: coefficients,
            drifter: None,
            delay: None,
            rng: rng_from_seed(sub_seed(seed, CONTEXT_STREAM)),
            next_round: 0,
        })
    }

    pub fn set_drifter(&mut self, drifter: CoefficientDrifter) -> Result<()> {
        if !drifter.base().same_shape(&self.base) {
            return Err(SimError::Config("drifter coefficients do not match the environment".into()));
        }
        self.drifter = Some(drifter);
        Ok(())
    }

    pub fn set_delay_function(&mut self, delay: Box<dyn DelayFunction>) {
        self.delay = Some(delay);
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dim_context(&self) -> usize {
        self.dim_context
    }

    /// The initial coefficients (the drifter's base set when drifting).
    pub fn base_coefficients(&self) -> &CoefficientSet {
        &self.base
    }

    pub fn has_delay(&self) -> bool {
        self.delay.is_some()
    }

    pub fn sample_round(&mut self) -> EnvironmentRound {
        let t = self.next_round;
        self.next_round += 1;

        let context: Vec<f64> = (0..self.dim_context)
            .map(|_| self.rng.sample::<f64, _>(StandardNormal))
            .collect();
        let drifted;
        let coefficients = match &mut self.drifter {
            Some(drifter) => {
                drifted = drifter.coefficients_for_round(t);
                &drifted
            }
            None => &self.base,
        };
        let expected_rewards =
            expected_rewards(&context, coefficients).expect("context drawn with environment dimension");
        let rewards = expected_rewards
            .iter()
            .map(|&p| u8::from(self.rng.random::<f64>() < p))
            .collect();
        let delay_rounds = self.delay.as_mut().map(|d| d.delays(&expected_rewards));

        EnvironmentRound { round_index: t, context, expected_rewards, rewards, delay_rounds }
    }

    pub fn sample_rounds(&mut self, n: usize) -> Vec<EnvironmentRound> {
        (0..n).map(|_| self.sample_round()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{ConstantDelay, DelayMode};
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigmoid_reference_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_abs_diff_eq!(sigmoid(3f64.ln()), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(sigmoid(-(3f64.ln())), 0.25, epsilon = 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn expected_rewards_degenerate_cases() {
        let zero = CoefficientSet::zeros(3, 2);
        assert_eq!(expected_rewards(&[1.3, -2.0], &zero).unwrap(), vec![0.5; 3]);

        let rows = vec![vec![0.4, -1.0], vec![2.0, 0.1], vec![-3.0, 5.0]];
        let coefs = CoefficientSet::from_rows(&rows).unwrap();
        assert_eq!(expected_rewards(&[0.0, 0.0], &coefs).unwrap(), vec![0.5; 3]);

        let one = CoefficientSet::from_rows(&[vec![3f64.ln()], vec![0.0]]).unwrap();
        let p = expected_rewards(&[1.0], &one).unwrap();
        assert_abs_diff_eq!(p[0], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn expected_rewards_rejects_dimension_mismatch() {
        let coefs = CoefficientSet::zeros(2, 3);
        assert!(matches!(
            expected_rewards(&[1.0], &coefs),
            Err(SimError::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn saturated_arms_always_pay_or_never_pay() {
        let coefs = CoefficientSet::from_rows_and_intercepts(&[vec![0.0], vec![0.0]], &[50.0, -50.0]).unwrap();
        let mut env = BanditEnvironment::with_coefficients(3, coefs).unwrap();
        for round in env.sample_rounds(2_000) {
            assert_eq!(round.rewards, vec![1, 0]);
            assert!(round.expected_rewards.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn empirical_reward_rate_matches_expected() {
        let config = EnvironmentConfig::new(4, 3, 11);
        let mut env = BanditEnvironment::new(&config).unwrap();
        let rounds = env.sample_rounds(10_000);
        for a in 0..4 {
            let p_mean = rounds.iter().map(|r| r.expected_rewards[a]).sum::<f64>() / 10_000.0;
            let r_mean = rounds.iter().map(|r| r.rewards[a] as f64).sum::<f64>() / 10_000.0;
            assert!((p_mean - r_mean).abs() < 0.02, "arm {a}: {p_mean} vs {r_mean}");
        }
    }

    #[test]
    fn fixed_arm_reward_rate_matches_its_probability() {
        // Context-free arm: its expected reward is the same every round.
        let coefs = CoefficientSet::from_rows_and_intercepts(&[vec![0.0, 0.0], vec![0.5, 0.5]], &[0.7, 0.0]).unwrap();
        let p_star = sigmoid(0.7);
        let mut env = BanditEnvironment::with_coefficients(99, coefs).unwrap();
        let mean = env.sample_rounds(10_000).iter().map(|r| r.rewards[0] as f64).sum::<f64>() / 10_000.0;
        assert!((mean - p_star).abs() < 0.02, "{mean} vs {p_star}");
    }

    #[test]
    fn identical_configs_give_identical_rounds() {
        let mut config = EnvironmentConfig::new(5, 4, 2024);
        config.delay = Some(DelayConfig::unbiased(30.0, 5));
        let a = BanditEnvironment::new(&config).unwrap().sample_rounds(500);
        let b = BanditEnvironment::new(&config).unwrap().sample_rounds(500);
        assert_eq!(a, b);
    }

    #[test]
    fn delay_presence_follows_configuration() {
        let plain = EnvironmentConfig::new(3, 2, 1);
        assert!(BanditEnvironment::new(&plain).unwrap().sample_rounds(20).iter().all(|r| r.delay_rounds.is_none()));

        let mut delayed = plain.clone();
        delayed.delay = Some(DelayConfig::reward_dependent(5.0, 10.0, 8));
        let rounds = BanditEnvironment::new(&delayed).unwrap().sample_rounds(20);
        assert!(rounds.iter().all(|r| r.delay_rounds.as_ref().map(Vec::len) == Some(3)));
        assert_eq!(delayed.delay.as_ref().unwrap().mode, DelayMode::RewardDependent);
    }

    #[test]
    fn delay_does_not_perturb_contexts_or_rewards() {
        let plain = EnvironmentConfig::new(3, 2, 77);
        let mut env_a = BanditEnvironment::new(&plain).unwrap();
        let mut env_b = BanditEnvironment::new(&plain).unwrap();
        env_b.set_delay_function(Box::new(ConstantDelay(4)));
        for _ in 0..100 {
            let (a, b) = (env_a.sample_round(), env_b.sample_round());
            assert_eq!(a.context, b.context);
            assert_eq!(a.rewards, b.rewards);
            assert_eq!(b.delay_rounds, Some(vec![4, 4, 4]));
        }
    }

    #[test]
    fn round_index_continues_across_calls() {
        let mut env = BanditEnvironment::new(&EnvironmentConfig::new(2, 1, 0)).unwrap();
        let first = env.sample_rounds(3);
        let second = env.sample_rounds(2);
        let idx: Vec<u64> = first.iter().chain(&second).map(|r| r.round_index).collect();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(BanditEnvironment::new(&EnvironmentConfig::new(1, 3, 0)).is_err());
        assert!(BanditEnvironment::new(&EnvironmentConfig::new(3, 0, 0)).is_err());
        let mut c = EnvironmentConfig::new(3, 2, 0);
        c.coefficient_scale = Some(0.0);
        assert!(BanditEnvironment::new(&c).is_err());
    }
}
