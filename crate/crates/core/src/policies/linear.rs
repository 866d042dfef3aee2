use nalgebra::{Cholesky, DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{argmax, check_action, check_n_actions, check_reward, ActionChoice, McPropensity, Policy};
use crate::{Result, SimError};

/// Per-arm ridge-regression statistics shared by LinUCB and LinTS.
///
/// `A_a = λ·I + Σ x xᵀ` and `b_a = Σ r x` over the rounds where arm `a` was
/// updated. The inverse of each `A_a` is maintained by Sherman–Morrison
/// rank-one updates.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicyState {
    lambda_reg: f64,
    a: Vec<DMatrix<f64>>,
    a_inv: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    theta_hat: Vec<DVector<f64>>,
}

impl LinearPolicyState {
    pub fn new(n_actions: usize, dim_context: usize, lambda_reg: f64) -> Result<Self> {
        check_n_actions(n_actions)?;
        if dim_context == 0 {
            return Err(SimError::Config("dim_context must be at least 1".into()));
        }
        if !(lambda_reg > 0.0 && lambda_reg.is_finite()) {
            return Err(SimError::Config(format!("lambda_reg must be positive, got {lambda_reg}")));
        }
        let eye = DMatrix::<f64>::identity(dim_context, dim_context);
        Ok(Self {
            lambda_reg,
            a: vec![&eye * lambda_reg; n_actions],
            a_inv: vec![&eye / lambda_reg; n_actions],
            b: vec![DVector::zeros(dim_context); n_actions],
            theta_hat: vec![DVector::zeros(dim_context); n_actions],
        })
    }

    pub fn n_actions(&self) -> usize {
        self.a.len()
    }

    pub fn dim_context(&self) -> usize {
        self.b[0].len()
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }

    pub fn a(&self, action: usize) -> &DMatrix<f64> {
        &self.a[action]
    }

    pub fn a_inv(&self, action: usize) -> &DMatrix<f64> {
        &self.a_inv[action]
    }

    pub fn b(&self, action: usize) -> &DVector<f64> {
        &self.b[action]
    }

    /// Ridge estimate `A_a⁻¹ b_a`.
    pub fn theta_hat(&self, action: usize) -> &DVector<f64> {
        &self.theta_hat[action]
    }

    fn check_context(&self, context: &[f64]) -> Result<()> {
        if context.len() != self.dim_context() {
            return Err(SimError::DimensionMismatch { expected: self.dim_context(), got: context.len() });
        }
        Ok(())
    }

    /// Predicted mean `x·θ̂_a` and uncertainty `sqrt(xᵀ A_a⁻¹ x)`.
    pub fn mean_and_width(&self, x: &DVector<f64>, action: usize) -> (f64, f64) {
        let mean = x.dot(&self.theta_hat[action]);
        let quad = x.dot(&(&self.a_inv[action] * x));
        (mean, quad.max(0.0).sqrt())
    }

    pub fn update(&mut self, context: &[f64], action: usize, reward: u8) -> Result<()> {
        check_action(action, self.n_actions())?;
        check_reward(reward)?;
        self.check_context(context)?;
        let x = DVector::from_column_slice(context);
        self.a[action].ger(1.0, &x, &x, 1.0);
        self.b[action].axpy(reward as f64, &x, 1.0);

        let a_inv = &mut self.a_inv[action];
        let u = &*a_inv * &x;
        let denom = 1.0 + x.dot(&u);
        a_inv.ger(-1.0 / denom, &u, &u, 1.0);
        let sym = (&*a_inv + a_inv.transpose()) * 0.5;
        *a_inv = sym;
        self.theta_hat[action] = &*a_inv * &self.b[action];
        Ok(())
    }
}

/// LinUCB: deterministic argmax of the upper confidence bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LinUcb {
    state: LinearPolicyState,
    alpha: f64,
}

impl LinUcb {
    pub fn new(n_actions: usize, dim_context: usize, lambda_reg: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(SimError::Config(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { state: LinearPolicyState::new(n_actions, dim_context, lambda_reg)?, alpha })
    }

    pub fn state(&self) -> &LinearPolicyState {
        &self.state
    }

    pub fn scores(&self, context: &[f64]) -> Result<Vec<f64>> {
        self.state.check_context(context)?;
        let x = DVector::from_column_slice(context);
        Ok((0..self.state.n_actions())
            .map(|a| {
                let (mean, width) = self.state.mean_and_width(&x, a);
                mean + self.alpha * width
            })
            .collect())
    }
}

impl Policy for LinUcb {
    fn n_actions(&self) -> usize {
        self.state.n_actions()
    }

    fn select(&mut self, context: &[f64], _rng: &mut dyn RngCore) -> Result<ActionChoice> {
        let scores = self.scores(context)?;
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(SimError::Numerical("non-finite LinUCB score".into()));
        }
        Ok(ActionChoice { action: argmax(&scores), propensity: 1.0 })
    }

    fn update(&mut self, context: &[f64], action: usize, reward: u8) -> Result<()> {
        self.state.update(context, action, reward)
    }
}

/// Linear Thompson sampling with posterior `N(θ̂_a, v²·A_a⁻¹)` per arm.
///
/// The chosen arm comes from one full coefficient draw per arm. The
/// propensity resamples only the arm scores: `x·θ̃_a` is exactly
/// `N(x·θ̂_a, v²·xᵀA_a⁻¹x)`, so this has the same distribution at a
/// fraction of the cost.
#[derive(Debug, Clone)]
pub struct LinTs {
    state: LinearPolicyState,
    v: f64,
    mc: McPropensity,
    chol: Vec<Option<DMatrix<f64>>>,
}

impl LinTs {
    pub fn new(n_actions: usize, dim_context: usize, lambda_reg: f64, v: f64, mc: McPropensity) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SimError::Config(format!("v must be positive, got {v}")));
        }
        mc.validate()?;
        Ok(Self { state: LinearPolicyState::new(n_actions, dim_context, lambda_reg)?, v, mc, chol: vec![None; n_actions] })
    }

    pub fn state(&self) -> &LinearPolicyState {
        &self.state
    }

    fn sqrt_a_inv(&mut self, action: usize) -> Result<&DMatrix<f64>> {
        if self.chol[action].is_none() {
            let factor = Cholesky::new(self.state.a_inv(action).clone())
                .ok_or_else(|| SimError::Numerical(format!("A⁻¹ of arm {action} is not positive definite")))?;
            self.chol[action] = Some(factor.unpack());
        }
        Ok(self.chol[action].as_ref().expect("filled above"))
    }
}

impl Policy for LinTs {
    fn n_actions(&self) -> usize {
        self.state.n_actions()
    }

    fn select(&mut self, context: &[f64], rng: &mut dyn RngCore) -> Result<ActionChoice> {
        self.state.check_context(context)?;
        let x = DVector::from_column_slice(context);
        let n = self.state.n_actions();
        let d = self.state.dim_context();

        let mut scores = Vec::with_capacity(n);
        for a in 0..n {
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
            let noise = self.sqrt_a_inv(a)? * z;
            let theta = self.state.theta_hat(a) + noise * self.v;
            scores.push(x.dot(&theta));
        }
        let action = argmax(&scores);

        let marginals: Vec<(f64, f64)> = (0..n)
            .map(|a| {
                let (mean, width) = self.state.mean_and_width(&x, a);
                (mean, self.v * width)
            })
            .collect();
        let mut hits = 0;
        for _ in 0..self.mc.n_resamples {
            for (s, &(mean, sd)) in scores.iter_mut().zip(&marginals) {
                let z: f64 = StandardNormal.sample(rng);
                *s = mean + sd * z;
            }
            if argmax(&scores) == action {
                hits += 1;
            }
        }
        Ok(ActionChoice { action, propensity: self.mc.estimate(hits) })
    }

    fn update(&mut self, context: &[f64], action: usize, reward: u8) -> Result<()> {
        self.state.update(context, action, reward)?;
        self.chol[action] = None;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fresh_linucb_ties_to_first_arm() {
        let mut p = LinUcb::new(4, 3, 1.0, 1.0).unwrap();
        let scores = p.scores(&[0.3, -1.0, 2.0]).unwrap();
        let expected = (0.09f64 + 1.0 + 4.0).sqrt();
        assert!(scores.iter().all(|&s| (s - expected).abs() < 1e-12));
        let c = p.select(&[0.3, -1.0, 2.0], &mut rng_from_seed(0)).unwrap();
        assert_eq!(c, ActionChoice { action: 0, propensity: 1.0 });
        assert_eq!(p.select(&[0.0; 3], &mut rng_from_seed(0)).unwrap().action, 0);
    }

    #[test]
    fn one_dimensional_rank_one_update() {
        let mut p = LinUcb::new(2, 1, 1.0, 0.7).unwrap();
        p.update(&[1.0], 0, 1).unwrap();
        assert_abs_diff_eq!(p.state().theta_hat(0)[0], 0.5, epsilon = 1e-15);
        let score = p.scores(&[1.0]).unwrap()[0];
        assert_abs_diff_eq!(score, 0.5 + 0.7 * 0.5f64.sqrt(), epsilon = 1e-12);

        let mut s = LinearPolicyState::new(2, 1, 1.0).unwrap();
        s.update(&[2.0], 0, 1).unwrap();
        assert_eq!(s.a(0)[(0, 0)], 5.0);
        assert_eq!(s.b(0)[0], 2.0);
        assert_abs_diff_eq!(s.theta_hat(0)[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(s.a_inv(0)[(0, 0)], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn update_leaves_other_arms_alone() {
        let mut s = LinearPolicyState::new(3, 2, 1.0).unwrap();
        let before = s.clone();
        s.update(&[1.0, -2.0], 1, 1).unwrap();
        for a in [0, 2] {
            assert_eq!(s.a(a), before.a(a));
            assert_eq!(s.b(a), before.b(a));
            assert_eq!(s.a_inv(a), before.a_inv(a));
        }
        assert!(s.update(&[1.0], 0, 1).is_err());
        assert!(s.update(&[1.0, 1.0], 3, 1).is_err());
    }

    #[test]
    fn lints_with_tiny_v_matches_argmax() {
        let mut p = LinTs::new(3, 2, 1.0, 1e-9, McPropensity::default()).unwrap();
        let mut rng = rng_from_seed(1);
        for (ctx, arm, r) in [([1.0, 0.0], 0, 1), ([0.0, 1.0], 1, 1), ([1.0, 1.0], 2, 0)] {
            p.update(&ctx, arm, r).unwrap();
        }
        for i in 0..1_000 {
            let ctx = [(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()];
            let x = DVector::from_column_slice(&ctx);
            let expected = argmax(&(0..3).map(|a| x.dot(p.state().theta_hat(a))).collect::<Vec<_>>());
            assert_eq!(p.select(&ctx, &mut rng).unwrap().action, expected);
        }
    }

    #[test]
    fn lints_fresh_two_arms_is_balanced() {
        let mut p = LinTs::new(2, 3, 1.0, 1.0, McPropensity { n_resamples: 10, floor: 1e-3 }).unwrap();
        let mut rng = rng_from_seed(2);
        let ones = (0..10_000).filter(|_| p.select(&[0.5, -1.0, 0.2], &mut rng).unwrap().action == 1).count();
        assert!((ones as f64 / 10_000.0 - 0.5).abs() < 0.03, "{ones}");
    }

    #[test]
    fn lints_zero_context_ties_to_first_arm() {
        let mut p = LinTs::new(4, 2, 1.0, 1.0, McPropensity::default()).unwrap();
        p.update(&[1.0, 1.0], 2, 1).unwrap();
        let c = p.select(&[0.0, 0.0], &mut rng_from_seed(3)).unwrap();
        assert_eq!(c, ActionChoice { action: 0, propensity: 1.0 });
    }
}
