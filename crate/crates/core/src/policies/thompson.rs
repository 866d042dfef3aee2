use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution};

use super::{argmax, check_action, check_n_actions, check_reward, ActionChoice, McPropensity, Policy};
use crate::{Result, SimError};

/// Bernoulli Thompson sampling with Beta posteriors per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliTs {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    mc: McPropensity,
}

impl BernoulliTs {
    /// Uniform `Beta(1, 1)` prior on every arm.
    pub fn new(n_actions: usize) -> Result<Self> {
        Self::with_prior(n_actions, 1.0, 1.0, McPropensity::default())
    }

    pub fn with_prior(n_actions: usize, prior_alpha: f64, prior_beta: f64, mc: McPropensity) -> Result<Self> {
        check_n_actions(n_actions)?;
        Self::from_state(vec![prior_alpha; n_actions], vec![prior_beta; n_actions], mc)
    }

    pub fn from_state(alpha: Vec<f64>, beta: Vec<f64>, mc: McPropensity) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(SimError::DimensionMismatch { expected: alpha.len(), got: beta.len() });
        }
        if alpha.iter().chain(&beta).any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(SimError::Config("Beta parameters must be positive".into()));
        }
        mc.validate()?;
        Ok(Self { alpha, beta, mc })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    fn posteriors(&self) -> Result<Vec<Beta<f64>>> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .map(|(&a, &b)| Beta::new(a, b).map_err(|e| SimError::Numerical(format!("Beta({a}, {b}): {e}"))))
            .collect()
    }
}

fn draw_argmax<R: Rng + ?Sized>(posteriors: &[Beta<f64>], scratch: &mut [f64], rng: &mut R) -> usize {
    for (s, p) in scratch.iter_mut().zip(posteriors) {
        *s = p.sample(rng);
    }
    argmax(scratch)
}

impl Policy for BernoulliTs {
    fn n_actions(&self) -> usize {
        self.alpha.len()
    }

    fn select(&mut self, _context: &[f64], rng: &mut dyn RngCore) -> Result<ActionChoice> {
        let posteriors = self.posteriors()?;
        let mut scratch = vec![0.0; posteriors.len()];
        let action = draw_argmax(&posteriors, &mut scratch, rng);
        let hits = (0..self.mc.n_resamples)
            .filter(|_| draw_argmax(&posteriors, &mut scratch, rng) == action)
            .count();
        Ok(ActionChoice { action, propensity: self.mc.estimate(hits) })
    }

    fn update(&mut self, _context: &[f64], action: usize, reward: u8) -> Result<()> {
        check_action(action, self.alpha.len())?;
        check_reward(reward)?;
        self.alpha[action] += reward as f64;
        self.beta[action] += 1.0 - reward as f64;
        Ok(())
    }
}
