use rand::seq::SliceRandom;

use crate::policies::argmax;
use crate::seed::rng_from_seed;

/// Linear softmax classifier over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassLinearModel {
    n_actions: usize,
    dim_context: usize,
    /// Row-major `n_actions × dim_context`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl MulticlassLinearModel {
    pub fn zeros(n_actions: usize, dim_context: usize) -> Self {
        Self { n_actions, dim_context, weights: vec![0.0; n_actions * dim_context], biases: vec![0.0; n_actions] }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn dim_context(&self) -> usize {
        self.dim_context
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weight_row(&self, action: usize) -> &[f64] {
        &self.weights[action * self.dim_context..(action + 1) * self.dim_context]
    }

    pub fn scores(&self, context: &[f64]) -> Vec<f64> {
        debug_assert_eq!(context.len(), self.dim_context);
        (0..self.n_actions)
            .map(|a| crate::env::dot(self.weight_row(a), context) + self.biases[a])
            .collect()
    }

    pub fn probabilities(&self, context: &[f64]) -> Vec<f64> {
        softmax(&self.scores(context))
    }

    /// Highest-scoring action, ties to the lowest index.
    pub fn predict(&self, context: &[f64]) -> usize {
        argmax(&self.scores(context))
    }
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TrainSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Mini-batch gradient descent on sample-weighted cross-entropy.
///
/// Weights are divided by their mean over the whole dataset. That rescales
/// the objective by a constant, leaving its minimiser unchanged, and keeps
/// the step size meaningful when IPW weights reach the clip. Zero-weight
/// rows contribute nothing; an all-zero weight vector returns the zero model.
pub(crate) fn train_weighted(
    contexts: &[&[f64]],
    labels: &[usize],
    sample_weights: &[f64],
    n_actions: usize,
    dim_context: usize,
    settings: TrainSettings,
) -> MulticlassLinearModel {
    let mut model = MulticlassLinearModel::zeros(n_actions, dim_context);
    let total: f64 = sample_weights.iter().sum();
    if total <= 0.0 {
        return model;
    }
    let mean_weight = total / sample_weights.len() as f64;

    let mut order: Vec<usize> = (0..contexts.len()).filter(|&i| sample_weights[i] > 0.0).collect();
    let mut rng = rng_from_seed(settings.seed);
    let mut grad_w = vec![0.0; n_actions * dim_context];
    let mut grad_b = vec![0.0; n_actions];
    let batch_size = settings.batch_size.max(1);

    for _ in 0..settings.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            grad_b.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let x = contexts[i];
                let w = sample_weights[i] / mean_weight;
                let mut p = model.probabilities(x);
                p[labels[i]] -= 1.0;
                for (a, &residual) in p.iter().enumerate() {
                    let g = w * residual;
                    grad_b[a] += g;
                    for (gw, &xj) in grad_w[a * dim_context..(a + 1) * dim_context].iter_mut().zip(x) {
                        *gw += g * xj;
                    }
                }
            }
            let step = settings.learning_rate / batch.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&grad_w) {
                *w -= step * g;
            }
            for (b, g) in model.biases.iter_mut().zip(&grad_b) {
                *b -= step * g;
            }
        }
    }
    model
}

/// Raises every probability to at least `floor` and rescales the remaining
/// mass so the vector still sums to one.
pub fn floor_and_renormalize(probabilities: &[f64], floor: f64) -> Vec<f64> {
    let n = probabilities.len();
    if floor * n as f64 >= 1.0 {
        return vec![1.0 / n as f64; n];
    }
    let mut pinned = vec![false; n];
    loop {
        let free_mass: f64 = probabilities.iter().zip(&pinned).filter(|(_, &f)| !f).map(|(p, _)| p).sum();
        let n_pinned = pinned.iter().filter(|&&f| f).count();
        let budget = 1.0 - floor * n_pinned as f64;
        if free_mass <= 0.0 {
            let n_free = n - n_pinned;
            return probabilities
                .iter()
                .zip(&pinned)
                .map(|(_, &f)| if f { floor } else { budget / n_free as f64 })
                .collect();
        }
        let scale = budget / free_mass;
        let mut changed = false;
        for (p, f) in probabilities.iter().zip(pinned.iter_mut()) {
            if !*f && p * scale < floor {
                *f = true;
                changed = true;
            }
        }
        if !changed {
            return probabilities
                .iter()
                .zip(&pinned)
                .map(|(p, &f)| if f { floor } else { p * scale })
                .collect();
        }
    }
}
