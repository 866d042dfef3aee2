//! Policy simulator with delayed updates.
//!
//! For each round `t` the simulator
//!
//! 1. applies every pending update due at or before `t`, in enqueue order;
//! 2. lets the policy choose an action for the round's context;
//! 3. records the choice in the [`SimulationLog`];
//! 4. enqueues the update for round `t + delay_rounds[action]` when the round
//!    carries delays, or applies it immediately otherwise.
//!
//! Updates still pending after the last round are discarded.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::RngCore;

use crate::env::{BanditEnvironment, EnvironmentRound};
use crate::offpolicy::LoggedInteraction;
use crate::policies::Policy;
use crate::{Result, SimError};

/// An update withheld until `apply_at_round`.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingUpdate {
    pub apply_at_round: u64,
    pub context: Vec<f64>,
    pub action: usize,
    pub reward: u8,
    seq: u64,
}

impl Eq for PendingUpdate {}

impl Ord for PendingUpdate {
    // Reversed so that `BinaryHeap` pops the earliest due update first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.apply_at_round, other.seq).cmp(&(self.apply_at_round, self.seq))
    }
}

impl PartialOrd for PendingUpdate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One row of the behaviour log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub round_index: u64,
    pub action: usize,
    pub propensity: f64,
    pub reward: u8,
    pub expected_reward: f64,
    pub max_expected_reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationLog {
    pub rows: Vec<LogRow>,
    /// Queued updates released before each round's selection. Immediate
    /// (undelayed) updates are not counted here.
    pub released_per_round: Vec<u32>,
    /// Rounds whose update went through the delay queue.
    pub delayed_rounds: usize,
    /// Updates the policy actually received.
    pub applied_updates: usize,
    /// Updates still queued when the run ended.
    pub discarded_updates: usize,
}

impl SimulationLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.reward as f64).collect()
    }

    pub fn expected_rewards(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.expected_reward).collect()
    }
}

/// Drives one policy through a stream of rounds.
pub struct PolicySimulator<'p, P: Policy + ?Sized> {
    policy: &'p mut P,
    queue: BinaryHeap<PendingUpdate>,
    next_seq: u64,
    log: SimulationLog,
}

impl<'p, P: Policy + ?Sized> PolicySimulator<'p, P> {
    pub fn new(policy: &'p mut P) -> Self {
        Self { policy, queue: BinaryHeap::new(), next_seq: 0, log: SimulationLog::default() }
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    fn apply_due(&mut self, t: u64) -> Result<u32> {
        let mut due = Vec::new();
        while self.queue.peek().is_some_and(|u| u.apply_at_round <= t) {
            due.push(self.queue.pop().expect("peeked"));
        }
        due.sort_by_key(|u| u.seq);
        for u in &due {
            self.policy.update(&u.context, u.action, u.reward)?;
        }
        Ok(due.len() as u32)
    }

    pub fn step(&mut self, round: &EnvironmentRound, rng: &mut dyn RngCore) -> Result<()> {
        if round.n_actions() != self.policy.n_actions() {
            return Err(SimError::DimensionMismatch { expected: self.policy.n_actions(), got: round.n_actions() });
        }
        let t = round.round_index;
        let applied = self.apply_due(t)?;
        self.log.applied_updates += applied as usize;

        let choice = self.policy.select(&round.context, rng)?;
        let a = choice.action;
        let reward = round.rewards[a];
        self.log.rows.push(LogRow {
            round_index: t,
            action: a,
            propensity: choice.propensity,
            reward,
            expected_reward: round.expected_rewards[a],
            max_expected_reward: round.max_expected_reward(),
        });
        self.log.released_per_round.push(applied);

        match &round.delay_rounds {
            Some(delays) => {
                self.log.delayed_rounds += 1;
                self.queue.push(PendingUpdate {
                    apply_at_round: t + delays[a],
                    context: round.context.clone(),
                    action: a,
                    reward,
                    seq: self.next_seq,
                });
                self.next_seq += 1;
            }
            None => {
                self.policy.update(&round.context, a, reward)?;
                self.log.applied_updates += 1;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> SimulationLog {
        self.log.discarded_updates = self.queue.len();
        self.log
    }
}

/// Runs `policy` for `horizon` fresh rounds drawn from `env`.
pub fn run<P: Policy + ?Sized>(
    policy: &mut P,
    env: &mut BanditEnvironment,
    horizon: usize,
    rng: &mut dyn RngCore,
) -> Result<SimulationLog> {
    if horizon == 0 {
        return Err(SimError::Config("horizon must be positive".into()));
    }
    let mut sim = PolicySimulator::new(policy);
    for _ in 0..horizon {
        let round = env.sample_round();
        sim.step(&round, rng)?;
    }
    Ok(sim.finish())
}

/// Runs `policy` over pre-generated rounds, so several policies can face
/// exactly the same data.
pub fn run_on_rounds<P: Policy + ?Sized>(
    policy: &mut P,
    rounds: &[EnvironmentRound],
    rng: &mut dyn RngCore,
) -> Result<SimulationLog> {
    let mut sim = PolicySimulator::new(policy);
    for round in rounds {
        sim.step(round, rng)?;
    }
    Ok(sim.finish())
}

/// Trailing mean over at most `window` values ending at each position.
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be positive");
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (t, &v) in values.iter().enumerate() {
        sum += v;
        if t >= window {
            sum -= values[t - window];
        }
        out.push(sum / (t + 1).min(window) as f64);
    }
    out
}

pub fn rolling_mean_reward(log: &SimulationLog, window: usize) -> Vec<f64> {
    rolling_mean(&log.rewards(), window)
}

pub fn rolling_mean_expected_reward(log: &SimulationLog, window: usize) -> Vec<f64> {
    rolling_mean(&log.expected_rewards(), window)
}

fn cumulative(values: impl Iterator<Item = f64>) -> Vec<f64> {
    values
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Running sum of `max expected reward − expected reward of the chosen arm`.
pub fn cumulative_regret(log: &SimulationLog) -> Vec<f64> {
    cumulative(log.rows.iter().map(|r| (r.max_expected_reward - r.expected_reward).max(0.0)))
}

pub fn cumulative_expected_reward(log: &SimulationLog) -> Vec<f64> {
    cumulative(log.rows.iter().map(|r| r.expected_reward))
}

/// Pairs each log row with its round's context.
pub fn export_logged_feedback<'a, I>(log: &SimulationLog, contexts: I) -> Result<Vec<LoggedInteraction>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = Vec::with_capacity(log.len());
    let mut contexts = contexts.into_iter();
    for row in &log.rows {
        let context = contexts
            .next()
            .ok_or(SimError::DimensionMismatch { expected: log.len(), got: out.len() })?;
        out.push(LoggedInteraction {
            round_index: row.round_index,
            context: context.to_vec(),
            action: row.action,
            reward: row.reward,
            logged_propensity: row.propensity,
        });
    }
    Ok(out)
}
