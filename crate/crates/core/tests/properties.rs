use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use bandit_sim::delay::ConstantDelay;
use bandit_sim::env::{BanditEnvironment, EnvironmentConfig};
use bandit_sim::offpolicy::{fit_propensity, ipw_weights, IpwConfig, LoggedInteraction};
use bandit_sim::policies::{BernoulliTs, LinTs, LinUcb, McPropensity, Policy, PolicySpec};
use bandit_sim::seed::rng_from_seed;
use bandit_sim::sim::{cumulative_regret, rolling_mean, run};

fn stream(n_actions: usize, dim: usize) -> impl Strategy<Value = Vec<(Vec<f64>, usize, u8)>> {
    proptest::collection::vec(
        (proptest::collection::vec(-3.0f64..3.0, dim), 0..n_actions, 0u8..=1),
        0..200,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bts_counts_match_oracle(updates in stream(3, 2), a0 in 0.5f64..3.0, b0 in 0.5f64..3.0) {
        let mut bts = BernoulliTs::with_prior(3, a0, b0, McPropensity::default()).unwrap();
        for (x, a, r) in &updates {
            bts.update(x, *a, *r).unwrap();
        }
        for arm in 0..3 {
            let hits = updates.iter().filter(|u| u.1 == arm && u.2 == 1).count() as f64;
            let misses = updates.iter().filter(|u| u.1 == arm && u.2 == 0).count() as f64;
            prop_assert!((bts.alpha()[arm] - a0 - hits).abs() <= 1e-9);
            prop_assert!((bts.beta()[arm] - b0 - misses).abs() <= 1e-9);
        }
    }

    #[test]
    fn linear_accumulators_match_oracle(updates in stream(3, 4), lambda in 0.1f64..5.0) {
        let mut ucb = LinUcb::new(3, 4, lambda, 1.0).unwrap();
        let mut ts = LinTs::new(3, 4, lambda, 1.0, McPropensity::default()).unwrap();
        for (x, a, r) in &updates {
            ucb.update(x, *a, *r).unwrap();
            ts.update(x, *a, *r).unwrap();
        }
        for arm in 0..3 {
            let mut a_oracle = DMatrix::<f64>::identity(4, 4) * lambda;
            let mut b_oracle = DVector::<f64>::zeros(4);
            for (x, _, r) in updates.iter().filter(|u| u.1 == arm) {
                let x = DVector::from_column_slice(x);
                a_oracle += &x * x.transpose();
                b_oracle += &x * f64::from(*r);
            }
            for state in [ucb.state(), ts.state()] {
                prop_assert!((state.a(arm) - &a_oracle).amax() <= 1e-9);
                prop_assert!((state.b(arm) - &b_oracle).amax() <= 1e-9);
                let theta = a_oracle.clone().lu().solve(&b_oracle).unwrap();
                prop_assert!((state.theta_hat(arm) - theta).amax() <= 1e-6);
            }
        }
    }

    #[test]
    fn every_update_is_applied_or_discarded(seed in 0u64..1000, delay in 0u64..60, horizon in 1usize..300) {
        let mut env = BanditEnvironment::new(&EnvironmentConfig::new(4, 2, seed)).unwrap();
        env.set_delay_function(Box::new(ConstantDelay(delay)));
        let mut policy = PolicySpec::from_name("egreedy").unwrap().build(4, 2).unwrap();
        let log = run(&mut policy, &mut env, horizon, &mut rng_from_seed(seed)).unwrap();
        prop_assert_eq!(log.applied_updates + log.discarded_updates, horizon);
        let released: u64 = log.released_per_round.iter().map(|&n| u64::from(n)).sum();
        prop_assert_eq!(released as usize, log.applied_updates);
        // An update due at round t is released before round t's selection,
        // so delay d leaves the last max(d, 1) updates undelivered.
        prop_assert_eq!(log.discarded_updates, (delay.max(1) as usize).min(horizon));
        let regret = cumulative_regret(&log);
        prop_assert!(regret.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn rolling_mean_stays_within_range(values in proptest::collection::vec(0.0f64..1.0, 1..300), window in 1usize..80) {
        let r = rolling_mean(&values, window);
        prop_assert_eq!(r.len(), values.len());
        prop_assert!(r.iter().all(|&m| (-1e-12..=1.0 + 1e-12).contains(&m)));
    }

    #[test]
    fn clipping_only_touches_rows_above_the_clip(
        rows in proptest::collection::vec((0u8..=1, 1e-6f64..1.0), 1..100),
        clip in 1.0f64..50.0,
    ) {
        let log: Vec<LoggedInteraction> = rows
            .iter()
            .enumerate()
            .map(|(i, &(reward, p))| LoggedInteraction {
                round_index: i as u64,
                context: vec![0.0],
                action: 0,
                reward,
                logged_propensity: p,
            })
            .collect();
        let props: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let clipped = ipw_weights(&log, &props, clip).unwrap();
        let raw = ipw_weights(&log, &props, f64::INFINITY).unwrap();
        for ((c, r), &(reward, p)) in clipped.iter().zip(&raw).zip(&rows) {
            if f64::from(reward) / p > clip {
                prop_assert_eq!(*c, clip);
            } else {
                prop_assert_eq!(c, r);
            }
        }
    }
}

#[test]
fn propensity_model_rows_sum_to_one() {
    let env_cfg = EnvironmentConfig::new(5, 3, 17);
    let rounds = BanditEnvironment::new(&env_cfg).unwrap().sample_rounds(1500);
    let mut logger = PolicySpec::from_name("bts").unwrap().build(5, 3).unwrap();
    let mut rng = rng_from_seed(3);
    let log: Vec<LoggedInteraction> = rounds
        .iter()
        .map(|r| {
            let choice = logger.select(&r.context, &mut rng).unwrap();
            logger.update(&r.context, choice.action, r.rewards[choice.action]).unwrap();
            LoggedInteraction {
                round_index: r.round_index,
                context: r.context.clone(),
                action: choice.action,
                reward: r.rewards[choice.action],
                logged_propensity: choice.propensity,
            }
        })
        .collect();
    let cfg = IpwConfig { propensity_floor: 0.01, ..IpwConfig::default() };
    let model = fit_propensity(&log, 5, &cfg).unwrap();
    for r in &rounds[..200] {
        let p = model.probabilities(&r.context);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(p.iter().all(|&q| q >= 0.01 - 1e-12));
    }
}
