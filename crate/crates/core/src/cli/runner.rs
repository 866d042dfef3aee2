use std::collections::HashMap;

use rayon::prelude::*;

use crate::delay::DelayMode;
use crate::env::{BanditEnvironment, EnvironmentRound};
use crate::offpolicy::{evaluate_ground_truth, fit_ipw, training_propensities, LoggedInteraction};
use crate::seed::{derive_seed, rng_from_seed};
use crate::sim::{
    cumulative_expected_reward, cumulative_regret, export_logged_feedback, rolling_mean_expected_reward,
    rolling_mean_reward, run_on_rounds, SimulationLog,
};
use crate::stats::RunningStats;
use crate::Result;

use super::config::ExperimentConfig;
use super::RunError;

/// Per-round series recorded for every policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    RollingReward,
    RollingExpectedReward,
    CumulativeExpectedReward,
    CumulativeRegret,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Self::RollingReward,
        Self::RollingExpectedReward,
        Self::CumulativeExpectedReward,
        Self::CumulativeRegret,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RollingReward => "rolling_reward",
            Self::RollingExpectedReward => "rolling_expected_reward",
            Self::CumulativeExpectedReward => "cumulative_expected_reward",
            Self::CumulativeRegret => "cumulative_regret",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub label: String,
    /// One series per [`Metric`], in `Metric::ALL` order.
    pub series: Vec<Vec<f64>>,
    pub final_cumulative_reward: f64,
    /// Mean expected reward of the chosen arms; onoff runs use the
    /// evaluation period that follows `horizon` training rounds.
    pub policy_value: f64,
}

impl PolicyRun {
    pub fn series(&self, metric: Metric) -> &[f64] {
        &self.series[metric as usize]
    }
}

/// Ground-truth value of one policy after `training_size` training rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct OnoffValue {
    pub training_size: usize,
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication: u64,
    pub runs: Vec<PolicyRun>,
    pub onoff: Vec<OnoffValue>,
    /// Logged feedback per policy label, kept only when `write_logs` is set.
    pub logs: Vec<(String, Vec<LoggedInteraction>)>,
}

impl ReplicationResult {
    pub fn run(&self, label: &str) -> Option<&PolicyRun> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn onoff_value(&self, training_size: usize, label: &str) -> Option<f64> {
        self.onoff
            .iter()
            .find(|v| v.training_size == training_size && v.label == label)
            .map(|v| v.value)
    }
}

/// Label under which the IPW learner trained on `logger`'s log is reported.
pub fn ipw_label(logger: &str) -> String {
    format!("ipw[{logger}]")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Variant {
    drift: bool,
    delay: Option<DelayMode>,
}

fn environment(config: &ExperimentConfig, replication: u64, variant: Variant) -> Result<BanditEnvironment> {
    let seed = |role: &str| derive_seed(config.master_seed, replication, role);
    let mut env = config.environment.to_config(seed("environment"));
    if variant.drift {
        env.drift = config.drifter.as_ref().map(|d| d.to_config(seed("drifter")));
    }
    if let (Some(mode), Some(section)) = (variant.delay, &config.delay) {
        env.delay = Some(section.to_config(mode, seed("delay"))?);
    }
    BanditEnvironment::new(&env)
}

fn mean_expected_reward(log: &SimulationLog, range: std::ops::Range<usize>) -> f64 {
    let n = range.len() as f64;
    log.rows[range].iter().map(|r| r.expected_reward).sum::<f64>() / n
}

/// Runs every policy of one replication.
///
/// Policies that share a (drift, delay) variant replay the same rounds, and
/// all variants share the context/reward stream, so every policy in the
/// roster faces identical data.
pub fn run_replication(config: &ExperimentConfig, replication: u64) -> Result<ReplicationResult> {
    let n_rounds = config.rounds_per_run();
    let n_actions = config.environment.n_actions;
    let dim = config.environment.dim_context;
    let loggers: Vec<&str> = config.onoff.iter().flat_map(|o| o.logging_policies.iter().map(String::as_str)).collect();

    let mut variants: Vec<(Variant, Vec<EnvironmentRound>)> = Vec::new();
    let mut result = ReplicationResult { replication, runs: Vec::new(), onoff: Vec::new(), logs: Vec::new() };
    let mut feedback: HashMap<&str, (usize, Vec<LoggedInteraction>)> = HashMap::new();

    for policy in &config.policies {
        let variant = Variant { drift: policy.drift && config.drifter.is_some(), delay: policy.delay };
        let index = match variants.iter().position(|(v, _)| *v == variant) {
            Some(i) => i,
            None => {
                let rounds = environment(config, replication, variant)?.sample_rounds(n_rounds);
                variants.push((variant, rounds));
                variants.len() - 1
            }
        };
        let rounds = &variants[index].1;
        let mut agent = policy.spec.build(n_actions, dim)?;
        // Keyed by algorithm name, not label: copies of one algorithm in
        // different variants draw the same exploration stream.
        let role = format!("policy/{}", policy.spec.name());
        let mut rng = rng_from_seed(derive_seed(config.master_seed, replication, &role));
        let log = run_on_rounds(&mut agent, rounds, &mut rng)?;

        let series = Metric::ALL
            .iter()
            .map(|m| match m {
                Metric::RollingReward => rolling_mean_reward(&log, config.rolling_window),
                Metric::RollingExpectedReward => rolling_mean_expected_reward(&log, config.rolling_window),
                Metric::CumulativeExpectedReward => cumulative_expected_reward(&log),
                Metric::CumulativeRegret => cumulative_regret(&log),
            })
            .collect();
        let policy_value = match config.onoff {
            Some(_) => mean_expected_reward(&log, config.horizon..2 * config.horizon),
            None => mean_expected_reward(&log, 0..n_rounds),
        };
        if let Some(onoff) = &config.onoff {
            for &n in &onoff.training_sizes {
                let value = mean_expected_reward(&log, n..2 * n);
                result.onoff.push(OnoffValue { training_size: n, label: policy.label.clone(), value });
            }
        }
        result.runs.push(PolicyRun {
            label: policy.label.clone(),
            series,
            final_cumulative_reward: log.rows.iter().map(|r| f64::from(r.reward)).sum(),
            policy_value,
        });

        let is_logger = loggers.contains(&policy.label.as_str());
        if is_logger || config.write_logs {
            let rows = export_logged_feedback(&log, rounds.iter().map(|r| r.context.as_slice()))?;
            if config.write_logs {
                result.logs.push((policy.label.clone(), rows.clone()));
            }
            if is_logger {
                feedback.insert(policy.label.as_str(), (index, rows));
            }
        }
    }

    if let Some(onoff) = &config.onoff {
        for logger in &onoff.logging_policies {
            let (index, rows) = &feedback[logger.as_str()];
            let rounds = &variants[*index].1;
            for &n in &onoff.training_sizes {
                let role = format!("ipw/{logger}/{n}");
                let ipw = config.ipw.to_config(derive_seed(config.master_seed, replication, &role));
                let train = &rows[..n];
                let propensities = training_propensities(train, n_actions, &ipw)?;
                let mut learner = fit_ipw(train, &propensities, n_actions, &ipw)?;
                let eval_seed = derive_seed(config.master_seed, replication, &format!("{role}/eval"));
                let value = evaluate_ground_truth(&mut learner, &rounds[n..2 * n], eval_seed)?;
                result.onoff.push(OnoffValue { training_size: n, label: ipw_label(logger), value });
            }
        }
        result.onoff.sort_by_key(|v| v.training_size);
    }
    Ok(result)
}

/// Cross-replication statistics, accumulated in replication order.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub labels: Vec<String>,
    pub rounds: usize,
    /// Indexed `[policy][metric][round]`.
    pub per_round: Vec<Vec<Vec<RunningStats>>>,
    /// `(policy, metric, stats)` in first-seen order.
    pub summary: Vec<(String, &'static str, RunningStats)>,
    /// `(training size, policy, stats)` in first-seen order.
    pub onoff: Vec<(usize, String, RunningStats)>,
}

pub const SUMMARY_METRICS: [&str; 4] =
    ["final_cumulative_reward", "final_cumulative_expected_reward", "final_cumulative_regret", "policy_value"];

impl Aggregate {
    pub fn new(config: &ExperimentConfig) -> Self {
        let rounds = config.rounds_per_run();
        let labels: Vec<String> = config.policies.iter().map(|p| p.label.clone()).collect();
        let per_round = labels
            .iter()
            .map(|_| Metric::ALL.iter().map(|_| vec![RunningStats::default(); rounds]).collect())
            .collect();
        Self { labels, rounds, per_round, summary: Vec::new(), onoff: Vec::new() }
    }

    pub fn replications(&self) -> u64 {
        self.summary.first().map_or(0, |(_, _, s)| s.count())
    }

    fn summary_slot(&mut self, label: &str, metric: &'static str) -> &mut RunningStats {
        let i = match self.summary.iter().position(|(l, m, _)| l == label && *m == metric) {
            Some(i) => i,
            None => {
                self.summary.push((label.to_string(), metric, RunningStats::default()));
                self.summary.len() - 1
            }
        };
        &mut self.summary[i].2
    }

    pub fn push(&mut self, result: &ReplicationResult) {
        for (p, run) in result.runs.iter().enumerate() {
            for (m, series) in run.series.iter().enumerate() {
                for (stats, &x) in self.per_round[p][m].iter_mut().zip(series) {
                    stats.push(x);
                }
            }
            let last = |m: Metric| run.series(m).last().copied().unwrap_or(0.0);
            let finals = [
                run.final_cumulative_reward,
                last(Metric::CumulativeExpectedReward),
                last(Metric::CumulativeRegret),
                run.policy_value,
            ];
            for (metric, value) in SUMMARY_METRICS.into_iter().zip(finals) {
                self.summary_slot(&run.label, metric).push(value);
            }
        }
        let horizon = self.rounds / 2;
        for v in &result.onoff {
            if v.label.starts_with("ipw[") && v.training_size == horizon {
                self.summary_slot(&v.label, "policy_value").push(v.value);
            }
            match self.onoff.iter_mut().find(|(n, l, _)| *n == v.training_size && *l == v.label) {
                Some((_, _, stats)) => stats.push(v.value),
                None => {
                    let mut stats = RunningStats::default();
                    stats.push(v.value);
                    self.onoff.push((v.training_size, v.label.clone(), stats));
                }
            }
        }
    }
}

/// Number of worker threads for `config`.
pub fn effective_jobs(config: &ExperimentConfig) -> usize {
    config
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

/// Runs all replications, `jobs` at a time, and folds them into an
/// [`Aggregate`] in replication order. `each` sees every result once, in
/// order, on the calling thread.
pub fn simulate<F>(config: &ExperimentConfig, mut each: F) -> std::result::Result<Aggregate, RunError>
where
    F: FnMut(&ReplicationResult) -> std::result::Result<(), RunError>,
{
    config.validate().map_err(RunError::Config)?;
    let jobs = effective_jobs(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| RunError::Runtime(format!("cannot start worker pool: {e}")))?;
    let mut aggregate = Aggregate::new(config);
    let all: Vec<u64> = (0..config.replications).collect();
    for chunk in all.chunks(jobs) {
        let results: Vec<_> = pool.install(|| {
            chunk
                .par_iter()
                .map(|&r| {
                    run_replication(config, r).map_err(|source| RunError::Replication {
                        replication: r,
                        master_seed: config.master_seed,
                        source,
                    })
                })
                .collect()
        });
        for result in results {
            let result = result?;
            each(&result)?;
            aggregate.push(&result);
        }
    }
    Ok(aggregate)
}
