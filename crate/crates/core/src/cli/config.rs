//! Experiment configuration.
//!
//! Configs are TOML. Resolution happens in four layers, each merged over the
//! previous one key by key: built-in defaults, the preset named by `preset`,
//! the config file, and command-line overrides. Tables merge recursively;
//! any other value, including arrays such as `policies`, is replaced whole.
//! Unknown keys are rejected and reported with their full path.
//!
//! Seeds are never written in a config. Every random stream is derived from
//! `master_seed`, the replication index and a role name.
//!
//! ```toml
//! preset = "sudden-drift"      # onoff | sudden-drift | seasonal-drift | delay-stationary | delay-seasonal
//! horizon = 50000              # rounds per run (onoff: training rounds; as many again are evaluated)
//! replications = 20
//! master_seed = 0
//! rolling_window = 500
//! output_dir = "results"
//! jobs = 4                     # concurrent replications, default: available cores
//! write_logs = false           # logged-feedback CSV per policy and replication
//!
//! [environment]
//! n_actions = 10
//! dim_context = 5
//! coefficient_scale = 0.45     # default 1/sqrt(dim_context)
//! intercept_scale = 1.0
//!
//! [drifter]
//! interval = 25000
//! transition_period = 5000     # default 0
//! transition_type = "linear"   # linear | weighted_sampled
//! seasonal = false
//! base_coefficient_weight = 0.3
//!
//! [delay]
//! mode = "reward_dependent"    # default for policies without `delay`: unbiased | reward_dependent
//! scale = 1000.0               # unbiased mean delay
//! min_scale = 900.0            # reward-dependent mean delay at p = 1
//! max_scale = 1000.0           # reward-dependent mean delay at p = 0
//!
//! [[policies]]
//! name = "egreedy"             # random | egreedy | bts | linucb | lints
//! label = "egreedy_delayed"    # unique, defaults to name
//! drift = true                 # whether this run faces the drifter
//! delay = "unbiased"           # none | unbiased | reward_dependent
//! epsilon = 0.1                # egreedy
//! # bts:    prior_alpha, prior_beta, n_resamples, propensity_floor
//! # linucb: alpha, lambda_reg
//! # lints:  v, lambda_reg, n_resamples, propensity_floor
//!
//! [ipw]
//! use_true_propensities = false
//! weight_clip = 100.0
//! propensity_floor = 0.001
//! learning_rate = 0.05
//! epochs = 30
//! batch_size = 256
//!
//! [onoff]
//! logging_policy = ["egreedy"] # policy labels; a single string is accepted
//! training_sizes = [500, 5000] # each in 1..=horizon, default [horizon]
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use toml::{Table, Value};

use crate::delay::{DelayConfig, DelayMode};
use crate::drift::{DrifterConfig, TransitionType};
use crate::env::EnvironmentConfig;
use crate::offpolicy::IpwConfig;
use crate::policies::{McPropensity, PolicySpec};
use crate::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Onoff,
    SuddenDrift,
    SeasonalDrift,
    DelayStationary,
    DelaySeasonal,
}

impl Preset {
    pub const ALL: [Preset; 5] =
        [Self::Onoff, Self::SuddenDrift, Self::SeasonalDrift, Self::DelayStationary, Self::DelaySeasonal];

    pub fn name(self) -> &'static str {
        match self {
            Self::Onoff => "onoff",
            Self::SuddenDrift => "sudden-drift",
            Self::SeasonalDrift => "seasonal-drift",
            Self::DelayStationary => "delay-stationary",
            Self::DelaySeasonal => "delay-seasonal",
        }
    }

    /// The preset's TOML layer.
    pub fn toml(self) -> &'static str {
        match self {
            Self::Onoff => ONOFF,
            Self::SuddenDrift => SUDDEN_DRIFT,
            Self::SeasonalDrift => SEASONAL_DRIFT,
            Self::DelayStationary => DELAY_STATIONARY,
            Self::DelaySeasonal => DELAY_SEASONAL,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            SimError::Config(format!("preset: unknown preset \"{s}\" (expected one of {})", names.join(", ")))
        })
    }
}

const DEFAULTS: &str = r#"
horizon = 10000
replications = 20
master_seed = 0
rolling_window = 500
output_dir = "results"
write_logs = false

[environment]
n_actions = 10
dim_context = 5
intercept_scale = 1.0
"#;

const ONOFF: &str = r#"
horizon = 5000
replications = 20

[[policies]]
name = "random"
[[policies]]
name = "egreedy"
[[policies]]
name = "bts"
[[policies]]
name = "linucb"
[[policies]]
name = "lints"

[onoff]
logging_policy = ["egreedy", "random", "bts"]
training_sizes = [500, 1000, 2000, 5000]
"#;

const SUDDEN_DRIFT: &str = r#"
horizon = 50000
replications = 20

[drifter]
interval = 25000
transition_period = 5000
transition_type = "linear"
seasonal = false
base_coefficient_weight = 0.3

[[policies]]
name = "egreedy"
[[policies]]
name = "bts"
[[policies]]
name = "linucb"
[[policies]]
name = "lints"
[[policies]]
name = "egreedy"
label = "egreedy_stationary"
drift = false
[[policies]]
name = "bts"
label = "bts_stationary"
drift = false
"#;

const SEASONAL_DRIFT: &str = r#"
horizon = 50000
replications = 20

[drifter]
interval = 5000
transition_period = 0
transition_type = "linear"
seasonal = true
base_coefficient_weight = 0.3

[[policies]]
name = "egreedy"
[[policies]]
name = "bts"
[[policies]]
name = "linucb"
[[policies]]
name = "lints"
[[policies]]
name = "egreedy"
label = "egreedy_stationary"
drift = false
[[policies]]
name = "bts"
label = "bts_stationary"
drift = false
"#;

const DELAY_STATIONARY: &str = r#"
horizon = 20000
replications = 100

[delay]
mode = "reward_dependent"
scale = 1000.0
min_scale = 900.0
max_scale = 1000.0

[[policies]]
name = "egreedy"
label = "egreedy_no_delay"
epsilon = 0.1
delay = "none"
[[policies]]
name = "egreedy"
label = "egreedy_unbiased"
epsilon = 0.1
delay = "unbiased"
[[policies]]
name = "egreedy"
label = "egreedy_reward_dependent"
epsilon = 0.1
delay = "reward_dependent"
"#;

const DELAY_SEASONAL: &str = r#"
horizon = 50000
replications = 100

[drifter]
interval = 5000
transition_period = 0
transition_type = "linear"
seasonal = true
base_coefficient_weight = 0.3

[delay]
mode = "reward_dependent"
scale = 1000.0
min_scale = 900.0
max_scale = 1000.0

[[policies]]
name = "egreedy"
label = "egreedy_no_delay"
epsilon = 0.1
delay = "none"
[[policies]]
name = "egreedy"
label = "egreedy_unbiased"
epsilon = 0.1
delay = "unbiased"
[[policies]]
name = "egreedy"
label = "egreedy_reward_dependent"
epsilon = 0.1
delay = "reward_dependent"
"#;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub n_actions: usize,
    pub dim_context: usize,
    #[serde(default)]
    pub coefficient_scale: Option<f64>,
    pub intercept_scale: f64,
}

impl EnvironmentSection {
    pub fn to_config(&self, seed: u64) -> EnvironmentConfig {
        let mut config = EnvironmentConfig::new(self.n_actions, self.dim_context, seed);
        config.coefficient_scale = self.coefficient_scale;
        config.intercept_scale = self.intercept_scale;
        config
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrifterSection {
    pub interval: u64,
    #[serde(default)]
    pub transition_period: u64,
    #[serde(default = "default_transition")]
    pub transition_type: TransitionType,
    #[serde(default)]
    pub seasonal: bool,
    #[serde(default)]
    pub base_coefficient_weight: f64,
}

fn default_transition() -> TransitionType {
    TransitionType::Linear
}

impl DrifterSection {
    pub fn to_config(&self, seed: u64) -> DrifterConfig {
        DrifterConfig {
            interval: self.interval,
            transition_period: self.transition_period,
            transition_type: self.transition_type,
            seasonal: self.seasonal,
            base_coefficient_weight: self.base_coefficient_weight,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySection {
    #[serde(default)]
    pub mode: Option<DelayMode>,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub min_scale: Option<f64>,
    #[serde(default)]
    pub max_scale: Option<f64>,
}

impl DelaySection {
    pub fn to_config(&self, mode: DelayMode, seed: u64) -> Result<DelayConfig> {
        let missing = |key: &str| SimError::Config(format!("delay.{key}: required for {mode:?} delay"));
        let config = match mode {
            DelayMode::Unbiased => DelayConfig::unbiased(self.scale.ok_or_else(|| missing("scale"))?, seed),
            DelayMode::RewardDependent => DelayConfig::reward_dependent(
                self.min_scale.ok_or_else(|| missing("min_scale"))?,
                self.max_scale.ok_or_else(|| missing("max_scale"))?,
                seed,
            ),
        };
        config.validate().map_err(|e| prefixed("delay", e))?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpwSection {
    pub use_true_propensities: bool,
    pub weight_clip: f64,
    pub propensity_floor: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for IpwSection {
    fn default() -> Self {
        let d = IpwConfig::default();
        Self {
            use_true_propensities: d.use_true_propensities,
            weight_clip: d.weight_clip,
            propensity_floor: d.propensity_floor,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
        }
    }
}

impl IpwSection {
    pub fn to_config(&self, seed: u64) -> IpwConfig {
        IpwConfig {
            use_true_propensities: self.use_true_propensities,
            weight_clip: self.weight_clip,
            propensity_floor: self.propensity_floor,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
        }
    }
}

/// One roster entry after resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub label: String,
    pub spec: PolicySpec,
    /// Faces the drifter when one is configured.
    pub drift: bool,
    pub delay: Option<DelayMode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnoffConfig {
    /// Labels of the roster policies whose logs train IPW learners.
    pub logging_policies: Vec<String>,
    pub training_sizes: Vec<usize>,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<Preset>,
    pub horizon: usize,
    pub replications: u64,
    pub master_seed: u64,
    pub rolling_window: usize,
    pub output_dir: PathBuf,
    pub jobs: Option<usize>,
    pub write_logs: bool,
    pub environment: EnvironmentSection,
    pub drifter: Option<DrifterSection>,
    pub delay: Option<DelaySection>,
    pub policies: Vec<PolicyConfig>,
    pub ipw: IpwSection,
    pub onoff: Option<OnoffConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    preset: Option<Preset>,
    horizon: usize,
    replications: u64,
    master_seed: u64,
    rolling_window: usize,
    output_dir: PathBuf,
    #[serde(default)]
    jobs: Option<usize>,
    write_logs: bool,
    environment: EnvironmentSection,
    #[serde(default)]
    drifter: Option<DrifterSection>,
    #[serde(default)]
    delay: Option<DelaySection>,
    #[serde(default)]
    policies: Vec<RawPolicy>,
    #[serde(default)]
    ipw: IpwSection,
    #[serde(default)]
    onoff: Option<RawOnoff>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    name: String,
    label: Option<String>,
    #[serde(default = "yes")]
    drift: bool,
    delay: Option<DelayChoice>,
    epsilon: Option<f64>,
    prior_alpha: Option<f64>,
    prior_beta: Option<f64>,
    alpha: Option<f64>,
    v: Option<f64>,
    lambda_reg: Option<f64>,
    n_resamples: Option<usize>,
    propensity_floor: Option<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DelayChoice {
    None,
    Unbiased,
    RewardDependent,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOnoff {
    logging_policy: OneOrMany,
    training_sizes: Option<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

fn prefixed(key: &str, err: SimError) -> SimError {
    match err {
        SimError::Config(msg) => SimError::Config(format!("{key}: {msg}")),
        other => SimError::Config(format!("{key}: {other}")),
    }
}

fn parse_table(text: &str, origin: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| SimError::Config(format!("{origin}: {e}")))
}

/// Merges `overlay` into `base`: tables recursively, everything else replaced.
pub fn merge_tables(base: &mut Table, overlay: Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Builds the merged table for a file table and overrides. The preset is
/// taken from the overrides first, then the file.
pub fn resolve_table(file: Table, overrides: Table) -> Result<Table> {
    let preset_value = overrides.get("preset").or_else(|| file.get("preset"));
    let preset = match preset_value {
        None => None,
        Some(Value::String(s)) => Some(s.parse::<Preset>()?),
        Some(other) => {
            return Err(SimError::Config(format!("preset: expected a string, got {}", other.type_str())));
        }
    };
    let mut table = parse_table(DEFAULTS, "defaults")?;
    if let Some(p) = preset {
        merge_tables(&mut table, parse_table(p.toml(), p.name())?);
    }
    merge_tables(&mut table, file);
    merge_tables(&mut table, overrides);
    Ok(table)
}

impl ExperimentConfig {
    /// Deserializes and validates a merged table.
    pub fn from_table(table: Table) -> Result<Self> {
        let raw: RawConfig = serde_path_to_error::deserialize(Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                SimError::Config(inner.to_string())
            } else {
                SimError::Config(format!("{path}: {inner}"))
            }
        })?;
        let config = raw.resolve()?;
        config.validate()?;
        Ok(config)
    }

    /// Resolves config text with no command-line overrides.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(resolve_table(parse_table(text, "config")?, Table::new())?)
    }

    /// The resolved preset with nothing overridden.
    pub fn preset(preset: Preset) -> Self {
        let mut overrides = Table::new();
        overrides.insert("preset".into(), Value::String(preset.name().into()));
        let table = resolve_table(Table::new(), overrides).expect("preset tables parse");
        Self::from_table(table).expect("presets are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: u64| {
            if v == 0 {
                Err(SimError::Config(format!("{key}: must be positive")))
            } else {
                Ok(())
            }
        };
        positive("horizon", self.horizon as u64)?;
        positive("replications", self.replications)?;
        positive("rolling_window", self.rolling_window as u64)?;
        if let Some(jobs) = self.jobs {
            positive("jobs", jobs as u64)?;
        }
        self.environment.to_config(0).validate().map_err(|e| prefixed("environment", e))?;
        if let Some(d) = &self.drifter {
            d.to_config(0).validate().map_err(|e| prefixed("drifter", e))?;
        }

        if self.policies.is_empty() {
            return Err(SimError::Config("policies: at least one policy is required".into()));
        }
        let mut labels = HashSet::new();
        for (i, p) in self.policies.iter().enumerate() {
            if !labels.insert(p.label.as_str()) {
                return Err(SimError::Config(format!("policies[{i}].label: duplicate label \"{}\"", p.label)));
            }
            p.spec
                .build(self.environment.n_actions, self.environment.dim_context)
                .map_err(|e| prefixed(&format!("policies[{i}]"), e))?;
            if let Some(mode) = p.delay {
                let section = self.delay.as_ref().ok_or_else(|| {
                    SimError::Config(format!("policies[{i}].delay: no [delay] section is configured"))
                })?;
                section.to_config(mode, 0)?;
            }
        }
        self.ipw.to_config(0).validate().map_err(|e| prefixed("ipw", e))?;

        if let Some(onoff) = &self.onoff {
            if onoff.logging_policies.is_empty() {
                return Err(SimError::Config("onoff.logging_policy: at least one label is required".into()));
            }
            for label in &onoff.logging_policies {
                if !labels.contains(label.as_str()) {
                    return Err(SimError::Config(format!(
                        "onoff.logging_policy: \"{label}\" is not a policy label"
                    )));
                }
            }
            if onoff.training_sizes.is_empty() {
                return Err(SimError::Config("onoff.training_sizes: must not be empty".into()));
            }
            if let Some(&n) = onoff.training_sizes.iter().find(|&&n| n == 0 || n > self.horizon) {
                return Err(SimError::Config(format!(
                    "onoff.training_sizes: {n} is outside 1..={}",
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    pub fn policy(&self, label: &str) -> Option<&PolicyConfig> {
        self.policies.iter().find(|p| p.label == label)
    }

    /// Rounds simulated per replication.
    pub fn rounds_per_run(&self) -> usize {
        if self.onoff.is_some() {
            2 * self.horizon
        } else {
            self.horizon
        }
    }
}

impl RawConfig {
    fn resolve(self) -> Result<ExperimentConfig> {
        let default_delay = self.delay.as_ref().and_then(|d| d.mode);
        let policies = self
            .policies
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.resolve(i, default_delay))
            .collect::<Result<Vec<_>>>()?;
        let onoff = self.onoff.map(|o| OnoffConfig {
            logging_policies: match o.logging_policy {
                OneOrMany::One(s) => vec![s],
                OneOrMany::Many(v) => v,
            },
            training_sizes: o.training_sizes.unwrap_or_else(|| vec![self.horizon]),
        });
        Ok(ExperimentConfig {
            preset: self.preset,
            horizon: self.horizon,
            replications: self.replications,
            master_seed: self.master_seed,
            rolling_window: self.rolling_window,
            output_dir: self.output_dir,
            jobs: self.jobs,
            write_logs: self.write_logs,
            environment: self.environment,
            drifter: self.drifter,
            delay: self.delay,
            policies,
            ipw: self.ipw,
            onoff,
        })
    }
}

impl RawPolicy {
    fn resolve(self, index: usize, default_delay: Option<DelayMode>) -> Result<PolicyConfig> {
        let key = |k: &str| format!("policies[{index}].{k}");
        let mut spec = PolicySpec::from_name(&self.name).ok_or_else(|| {
            SimError::Config(format!(
                "{}: unknown policy \"{}\" (expected one of {})",
                key("name"),
                self.name,
                PolicySpec::NAMES.join(", ")
            ))
        })?;
        let name = spec.name();
        let given: [(&str, Option<f64>); 8] = [
            ("epsilon", self.epsilon),
            ("prior_alpha", self.prior_alpha),
            ("prior_beta", self.prior_beta),
            ("alpha", self.alpha),
            ("v", self.v),
            ("lambda_reg", self.lambda_reg),
            ("n_resamples", self.n_resamples.map(|n| n as f64)),
            ("propensity_floor", self.propensity_floor),
        ];
        for (field, value) in given {
            let Some(value) = value else { continue };
            let applied = match (&mut spec, field) {
                (PolicySpec::EpsilonGreedy { epsilon }, "epsilon") => set(epsilon, value),
                (PolicySpec::BernoulliTs { prior_alpha, .. }, "prior_alpha") => set(prior_alpha, value),
                (PolicySpec::BernoulliTs { prior_beta, .. }, "prior_beta") => set(prior_beta, value),
                (PolicySpec::LinUcb { alpha, .. }, "alpha") => set(alpha, value),
                (PolicySpec::LinTs { v, .. }, "v") => set(v, value),
                (PolicySpec::LinUcb { lambda_reg, .. } | PolicySpec::LinTs { lambda_reg, .. }, "lambda_reg") => {
                    set(lambda_reg, value)
                }
                (PolicySpec::BernoulliTs { mc, .. } | PolicySpec::LinTs { mc, .. }, f) => set_mc(mc, f, value),
                _ => false,
            };
            if !applied {
                return Err(SimError::Config(format!("{}: does not apply to policy \"{name}\"", key(field))));
            }
        }
        let delay = match self.delay {
            None => default_delay,
            Some(DelayChoice::None) => None,
            Some(DelayChoice::Unbiased) => Some(DelayMode::Unbiased),
            Some(DelayChoice::RewardDependent) => Some(DelayMode::RewardDependent),
        };
        Ok(PolicyConfig { label: self.label.unwrap_or_else(|| name.to_string()), spec, drift: self.drift, delay })
    }
}

fn set(slot: &mut f64, value: f64) -> bool {
    *slot = value;
    true
}

fn set_mc(mc: &mut McPropensity, field: &str, value: f64) -> bool {
    match field {
        "n_resamples" => mc.n_resamples = value as usize,
        "propensity_floor" => mc.floor = value,
        _ => return false,
    }
    true
}

/// Reads a config file and applies `overrides`.
pub fn load_config_with(path: &Path, overrides: Table) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::Config(format!("{}: cannot read config: {e}", path.display())))?;
    let file = parse_table(&text, &path.display().to_string())?;
    ExperimentConfig::from_table(resolve_table(file, overrides)?)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    load_config_with(path, Table::new())
}
