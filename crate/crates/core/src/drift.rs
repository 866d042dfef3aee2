//! Concept drift over the reward coefficients.
//!
//! Time is cut into epochs of `interval` rounds. Epoch `k` is governed by
//! concept `k`; during the last `transition_period` rounds of an epoch the
//! coefficients move towards concept `k + 1`, either by linear blending or
//! by switching stochastically with a growing probability. The resulting
//! concept is then mixed with the fixed base set:
//!
//! ```text
//! Θ_eff = w_base · Θ_base + (1 − w_base) · Θ_concept
//! ```
//!
//! The four classic drift types map onto the parameters as follows:
//! sudden is `transition_period = 0`, incremental is a long linear
//! transition, gradual is the `weighted_sampled` transition, and seasonal
//! alternates between two concepts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::CoefficientSet;
use crate::seed::{rng_from_seed, sub_seed, SimRng};
use crate::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionType {
    /// Convex blend of the current and next concept.
    Linear,
    /// Next concept with probability λ, current otherwise, drawn per round.
    WeightedSampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrifterConfig {
    pub interval: u64,
    pub transition_period: u64,
    pub transition_type: TransitionType,
    pub seasonal: bool,
    pub base_coefficient_weight: f64,
    pub seed: u64,
}

impl DrifterConfig {
    /// Step change every `interval` rounds.
    pub fn sudden(interval: u64, base_coefficient_weight: f64, seed: u64) -> Self {
        Self {
            interval,
            transition_period: 0,
            transition_type: TransitionType::Linear,
            seasonal: false,
            base_coefficient_weight,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return Err(SimError::Config("drifter interval must be positive".into()));
        }
        if self.transition_period > self.interval {
            return Err(SimError::Config(format!(
                "drifter transition_period ({}) exceeds interval ({})",
                self.transition_period, self.interval
            )));
        }
        if !(0.0..=1.0).contains(&self.base_coefficient_weight) {
            return Err(SimError::Config(format!(
                "base_coefficient_weight must lie in [0, 1], got {}",
                self.base_coefficient_weight
            )));
        }
        Ok(())
    }
}

/// Fraction of the way from the current to the next concept at round `t`.
pub fn blend_fraction(t: u64, config: &DrifterConfig) -> f64 {
    if config.transition_period == 0 {
        return 0.0;
    }
    let s = t % config.interval;
    let window_start = config.interval - config.transition_period;
    if s < window_start {
        0.0
    } else {
        (s - window_start + 1) as f64 / config.transition_period as f64
    }
}

/// The base set plus the concepts `Θ_0, Θ_1, …`, generated lazily from the
/// drifter's own stream. Seasonal sequences hold exactly two concepts.
#[derive(Debug, Clone)]
pub struct ConceptSequence {
    base: CoefficientSet,
    concepts: Vec<CoefficientSet>,
    seasonal: bool,
    /// False for explicit sequences, which repeat their last concept.
    generated: bool,
    coefficient_scale: f64,
    intercept_scale: f64,
    rng: SimRng,
}

impl ConceptSequence {
    pub fn new(base: CoefficientSet, seasonal: bool, coefficient_scale: f64, intercept_scale: f64, seed: u64) -> Self {
        let mut seq = Self {
            base,
            concepts: Vec::new(),
            seasonal,
            generated: true,
            coefficient_scale,
            intercept_scale,
            rng: rng_from_seed(seed),
        };
        if seasonal {
            seq.extend_to(2);
        }
        seq
    }

    /// Sequence with explicitly given concepts (two of them when seasonal).
    pub fn from_concepts(base: CoefficientSet, concepts: Vec<CoefficientSet>, seasonal: bool) -> Result<Self> {
        if concepts.iter().any(|c| !c.same_shape(&base)) {
            return Err(SimError::Config("all concepts must match the base coefficient shape".into()));
        }
        if seasonal && concepts.len() != 2 {
            return Err(SimError::Config("seasonal drift needs exactly two concepts".into()));
        }
        if concepts.is_empty() {
            return Err(SimError::Config("at least one concept is required".into()));
        }
        Ok(Self {
            base,
            concepts,
            seasonal,
            generated: false,
            coefficient_scale: 0.0,
            intercept_scale: 0.0,
            rng: rng_from_seed(0),
        })
    }

    fn extend_to(&mut self, len: usize) {
        while self.concepts.len() < len {
            let next = CoefficientSet::sample(
                self.base.n_actions(),
                self.base.dim_context(),
                self.coefficient_scale,
                self.intercept_scale,
                &mut self.rng,
            );
            self.concepts.push(next);
        }
    }

    pub fn base(&self) -> &CoefficientSet {
        &self.base
    }

    /// Concept governing epoch `epoch`.
    pub fn concept(&mut self, epoch: u64) -> &CoefficientSet {
        let idx = if self.seasonal {
            (epoch % 2) as usize
        } else {
            let idx = usize::try_from(epoch).expect("epoch index fits in usize");
            if idx >= self.concepts.len() {
                if !self.generated {
                    return self.concepts.last().expect("non-empty");
                }
                self.extend_to(idx + 1);
            }
            idx
        };
        &self.concepts[idx]
    }

    pub fn n_generated(&self) -> usize {
        self.concepts.len()
    }
}

/// Coefficients in effect at round `t`.
///
/// `rng` is consumed only by the `weighted_sampled` transition, one draw per
/// round that falls strictly inside a transition window.
pub fn coefficients_for_round<R: Rng + ?Sized>(
    t: u64,
    seq: &mut ConceptSequence,
    config: &DrifterConfig,
    rng: &mut R,
) -> CoefficientSet {
    let epoch = t / config.interval;
    let lambda = blend_fraction(t, config);
    let concept = if lambda == 0.0 {
        seq.concept(epoch).clone()
    } else {
        match config.transition_type {
            TransitionType::Linear => {
                let current = seq.concept(epoch).clone();
                current.lerp(seq.concept(epoch + 1), lambda)
            }
            TransitionType::WeightedSampled => {
                let take_next = lambda >= 1.0 || rng.random::<f64>() < lambda;
                seq.concept(epoch + u64::from(take_next)).clone()
            }
        }
    };
    let w = config.base_coefficient_weight;
    concept.lerp(seq.base(), w)
}

/// Owns the concept sequence and the switching stream for one environment.
#[derive(Debug, Clone)]
pub struct CoefficientDrifter {
    config: DrifterConfig,
    concepts: ConceptSequence,
    rng: SimRng,
}

const CONCEPT_STREAM: u64 = 0;
const SWITCH_STREAM: u64 = 1;

impl CoefficientDrifter {
    /// New concepts are drawn at the same scales as the base coefficients.
    pub fn new(config: DrifterConfig, base: CoefficientSet, coefficient_scale: f64, intercept_scale: f64) -> Result<Self> {
        config.validate()?;
        let concepts = ConceptSequence::new(
            base,
            config.seasonal,
            coefficient_scale,
            intercept_scale,
            sub_seed(config.seed, CONCEPT_STREAM),
        );
        let rng = rng_from_seed(sub_seed(config.seed, SWITCH_STREAM));
        Ok(Self { config, concepts, rng })
    }

    pub fn with_concepts(config: DrifterConfig, concepts: ConceptSequence) -> Result<Self> {
        config.validate()?;
        if config.seasonal != concepts.seasonal {
            return Err(SimError::Config("seasonal flag differs between config and concepts".into()));
        }
        let rng = rng_from_seed(sub_seed(config.seed, SWITCH_STREAM));
        Ok(Self { config, concepts, rng })
    }

    pub fn config(&self) -> &DrifterConfig {
        &self.config
    }

    pub fn base(&self) -> &CoefficientSet {
        self.concepts.base()
    }

    pub fn concept(&mut self, epoch: u64) -> &CoefficientSet {
        self.concepts.concept(epoch)
    }

    pub fn coefficients_for_round(&mut self, t: u64) -> CoefficientSet {
        coefficients_for_round(t, &mut self.concepts, &self.config, &mut self.rng)
    }
}
