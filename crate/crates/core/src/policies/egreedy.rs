use rand::{Rng, RngCore};

use super::{check_action, check_n_actions, check_reward, ActionChoice, Policy};
use crate::{Result, SimError};

/// Count-based ε-greedy over per-arm sample means.
///
/// Unvisited arms are treated as having an infinite mean, so each arm is
/// tried once before the greedy comparison becomes meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonGreedy {
    epsilon: f64,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
}

impl EpsilonGreedy {
    pub fn new(n_actions: usize, epsilon: f64) -> Result<Self> {
        check_n_actions(n_actions)?;
        Self::from_state(epsilon, vec![0; n_actions], vec![0.0; n_actions])
    }

    pub fn from_state(epsilon: f64, counts: Vec<u64>, reward_sums: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(SimError::Config(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        if counts.len() != reward_sums.len() {
            return Err(SimError::DimensionMismatch { expected: counts.len(), got: reward_sums.len() });
        }
        if counts.iter().zip(&reward_sums).any(|(&c, &s)| !(0.0..=c as f64).contains(&s)) {
            return Err(SimError::Config("reward_sums must lie between 0 and the arm counts".into()));
        }
        Ok(Self { epsilon, counts, reward_sums })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn reward_sums(&self) -> &[f64] {
        &self.reward_sums
    }

    /// The arm chosen when not exploring.
    pub fn greedy_action(&self) -> usize {
        if let Some(unvisited) = self.counts.iter().position(|&c| c == 0) {
            return unvisited;
        }
        let mut best = 0;
        let mut best_mean = f64::NEG_INFINITY;
        for (a, (&c, &s)) in self.counts.iter().zip(&self.reward_sums).enumerate() {
            let mean = s / c as f64;
            if mean > best_mean {
                best = a;
                best_mean = mean;
            }
        }
        best
    }

    /// Selection probability of `action` under the current state.
    pub fn action_probability(&self, action: usize) -> f64 {
        let uniform = self.epsilon / self.counts.len() as f64;
        if action == self.greedy_action() {
            uniform + (1.0 - self.epsilon)
        } else {
            uniform
        }
    }
}

impl Policy for EpsilonGreedy {
    fn n_actions(&self) -> usize {
        self.counts.len()
    }

    fn select(&mut self, _context: &[f64], rng: &mut dyn RngCore) -> Result<ActionChoice> {
        let action = if rng.random::<f64>() < self.epsilon {
            rng.random_range(0..self.counts.len())
        } else {
            self.greedy_action()
        };
        Ok(ActionChoice { action, propensity: self.action_probability(action) })
    }

    fn update(&mut self, _context: &[f64], action: usize, reward: u8) -> Result<()> {
        check_action(action, self.counts.len())?;
        check_reward(reward)?;
        self.counts[action] += 1;
        self.reward_sums[action] += reward as f64;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn pure_exploration_is_uniform() {
        let mut p = EpsilonGreedy::from_state(1.0, vec![3, 1, 0, 2], vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        let mut rng = rng_from_seed(0);
        let mut counts = [0usize; 4];
        for _ in 0..8_000 {
            let c = p.select(&[], &mut rng).unwrap();
            assert_eq!(c.propensity, 0.25);
            counts[c.action] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 / 8_000.0 - 0.25).abs() < 0.02));
    }

    #[test]
    fn pure_exploitation_picks_best_mean() {
        let mut p = EpsilonGreedy::from_state(0.0, vec![5, 5], vec![4.0, 1.0]).unwrap();
        let c = p.select(&[], &mut rng_from_seed(1)).unwrap();
        assert_eq!(c, ActionChoice { action: 0, propensity: 1.0 });
    }

    #[test]
    fn greedy_propensity_with_exploration() {
        let mut counts = vec![4; 10];
        counts[3] = 4;
        let mut sums = vec![1.0; 10];
        sums[3] = 3.0;
        let p = EpsilonGreedy::from_state(0.1, counts, sums).unwrap();
        assert_eq!(p.greedy_action(), 3);
        assert!((p.action_probability(3) - 0.91).abs() < 1e-12);
        assert!((p.action_probability(0) - 0.01).abs() < 1e-12);
        let total: f64 = (0..10).map(|a| p.action_probability(a)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unvisited_arms_come_first() {
        let p = EpsilonGreedy::from_state(0.0, vec![2, 0, 0], vec![2.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.greedy_action(), 1);
    }

    #[test]
    fn update_touches_one_arm() {
        let mut p = EpsilonGreedy::new(3, 0.1).unwrap();
        p.update(&[], 1, 0).unwrap();
        assert_eq!(p.counts(), &[0, 1, 0]);
        assert_eq!(p.reward_sums(), &[0.0, 0.0, 0.0]);
        p.update(&[], 1, 1).unwrap();
        assert_eq!(p.reward_sums(), &[0.0, 1.0, 0.0]);
        assert!(matches!(p.update(&[], 3, 1), Err(SimError::ActionOutOfRange { .. })));
        assert!(matches!(p.update(&[], 0, 2), Err(SimError::InvalidReward(2))));
    }
}
