use rand::{Rng, RngCore};

use super::{check_action, check_n_actions, check_reward, ActionChoice, Policy};
use crate::Result;

/// Uniformly random arm selection.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    n_actions: usize,
}

impl RandomPolicy {
    pub fn new(n_actions: usize) -> Result<Self> {
        check_n_actions(n_actions)?;
        Ok(Self { n_actions })
    }
}

impl Policy for RandomPolicy {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn select(&mut self, _context: &[f64], rng: &mut dyn RngCore) -> Result<ActionChoice> {
        Ok(ActionChoice { action: rng.random_range(0..self.n_actions), propensity: 1.0 / self.n_actions as f64 })
    }

    fn update(&mut self, _context: &[f64], action: usize, reward: u8) -> Result<()> {
        check_action(action, self.n_actions)?;
        check_reward(reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn propensity_is_uniform() {
        let mut p = RandomPolicy::new(10).unwrap();
        let mut rng = rng_from_seed(0);
        for _ in 0..100 {
            assert_eq!(p.select(&[], &mut rng).unwrap().propensity, 0.1);
        }
    }

    #[test]
    fn frequencies_are_uniform() {
        let mut p = RandomPolicy::new(4).unwrap();
        let mut rng = rng_from_seed(1);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[p.select(&[0.0], &mut rng).unwrap().action] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn two_arms_stay_in_range() {
        let mut p = RandomPolicy::new(2).unwrap();
        let mut rng = rng_from_seed(2);
        assert!((0..1000).all(|_| p.select(&[], &mut rng).unwrap().action < 2));
        assert!(RandomPolicy::new(1).is_err());
    }
}
