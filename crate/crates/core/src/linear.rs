//! One-vs-rest logistic regression over sparse sentence features.
//!
//! Each target gets an independent binary model trained by SGD on the
//! regularized objective `mean_i logloss_i + (l2/2)·|w|²`, with the learning
//! rate decaying as `lr / (1 + epoch)`. The L2 shrinkage is applied exactly on
//! every step through a shared scale factor, so updates stay sparse.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::persist::{format_tag, Versioned};
use crate::schema::Target;
use crate::textproc::{FeatureVector, Vocabulary};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training examples")]
    NoExamples,
    #[error("positive target {0} is not among the model targets")]
    UnknownTarget(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("feature id {0} is outside the vocabulary")]
    FeatureOutOfRange(u32),
    #[error("example {index}: {message}")]
    BadExample { index: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            epochs: 20,
            l2: 1e-4,
            seed: 7,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2 * self.learning_rate < 1.0) {
            return bad("l2 must be non-negative and l2 * learning_rate < 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate / (1.0 + epoch as f64)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Negative log-likelihood of `label` under margin `m`.
pub fn log_loss(margin: f64, label: bool) -> f64 {
    if label {
        softplus(-margin)
    } else {
        softplus(margin)
    }
}

/// Loss and gradient of one binary problem:
/// `mean_i logloss(w·x_i + b, y_i) + (l2/2)·|w|²`. The bias is not regularized.
pub fn binary_objective(
    weights: &[f64],
    bias: f64,
    examples: &[(FeatureVector, bool)],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = examples.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_b = 0.0;
    for (x, y) in examples {
        let m = x.dot(weights) + bias;
        loss += log_loss(m, *y) / n;
        let g = (sigmoid(m) - if *y { 1.0 } else { 0.0 }) / n;
        for &(i, v) in x.entries() {
            grad[i as usize] += g * v;
        }
        grad_b += g;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad, grad_b)
}

/// Weight vector stored as `scale * v` so that L2 shrinkage is O(1).
struct ScaledWeights {
    v: Vec<f64>,
    scale: f64,
}

impl ScaledWeights {
    fn new(dim: usize) -> Self {
        ScaledWeights {
            v: vec![0.0; dim],
            scale: 1.0,
        }
    }

    fn dot(&self, x: &FeatureVector) -> f64 {
        self.scale * x.dot(&self.v)
    }

    fn shrink(&mut self, factor: f64) {
        self.scale *= factor;
        if self.scale < 1e-9 {
            self.v.iter_mut().for_each(|w| *w *= self.scale);
            self.scale = 1.0;
        }
    }

    fn add_scaled(&mut self, x: &FeatureVector, step: f64) {
        let k = step / self.scale;
        for &(i, v) in x.entries() {
            self.v[i as usize] += k * v;
        }
    }

    fn into_weights(self) -> Vec<f64> {
        let s = self.scale;
        self.v.into_iter().map(|w| w * s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelModel {
    format: String,
    format_version: u64,
    pub targets: Vec<Target>,
    pub vocabulary: Vocabulary,
    /// One dense row per target, indexed by feature id.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub config: TrainConfig,
    pub learning_rate_schedule: String,
}

impl Versioned for MultiLabelModel {
    const FORMAT: &'static str = "sdoh-multilabel-logreg";
    const VERSION: u64 = 1;
}

impl MultiLabelModel {
    /// All-zero model: every probability is 0.5.
    pub fn zeros(targets: Vec<Target>, vocabulary: Vocabulary, config: TrainConfig) -> Self {
        let dim = vocabulary.len();
        MultiLabelModel {
            format: format_tag::<Self>(),
            format_version: Self::VERSION,
            weights: vec![vec![0.0; dim]; targets.len()],
            biases: vec![0.0; targets.len()],
            targets,
            vocabulary,
            config,
            learning_rate_schedule: "lr/(1+epoch)".to_string(),
        }
    }

    /// Probability per target, aligned with `self.targets`.
    pub fn predict(&self, fv: &FeatureVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| sigmoid(fv.dot(w) + b))
            .collect()
    }

    pub fn decide(&self, fv: &FeatureVector) -> Vec<bool> {
        self.predict(fv)
            .into_iter()
            .map(|p| p >= self.config.threshold)
            .collect()
    }

    pub fn target_index(&self, target: &Target) -> Option<usize> {
        self.targets.iter().position(|t| t == target)
    }

    /// Sum over targets of the regularized objective on `examples`.
    pub fn training_loss(&self, examples: &[(FeatureVector, BTreeSet<Target>)]) -> f64 {
        self.targets
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let binary: Vec<(FeatureVector, bool)> = examples
                    .iter()
                    .map(|(x, pos)| (x.clone(), pos.contains(t)))
                    .collect();
                binary_objective(&self.weights[k], self.biases[k], &binary, self.config.l2).0
            })
            .sum()
    }
}

fn check_examples(
    examples: &[(FeatureVector, BTreeSet<Target>)],
    targets: &[Target],
    dim: usize,
) -> Result<Vec<Vec<bool>>, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::NoExamples);
    }
    examples
        .iter()
        .map(|(x, pos)| {
            if let Some(id) = x.max_id().filter(|&id| id as usize >= dim) {
                return Err(TrainError::FeatureOutOfRange(id));
            }
            if let Some(t) = pos.iter().find(|t| !targets.contains(t)) {
                return Err(TrainError::UnknownTarget(t.key()));
            }
            Ok(targets.iter().map(|t| pos.contains(t)).collect())
        })
        .collect()
}

/// Trains one independent logistic model per target. Deterministic for a fixed seed.
pub fn train_multilabel(
    examples: &[(FeatureVector, BTreeSet<Target>)],
    targets: &[Target],
    vocabulary: Vocabulary,
    config: &TrainConfig,
) -> Result<MultiLabelModel, TrainError> {
    config.validate()?;
    let dim = vocabulary.len();
    let labels = check_examples(examples, targets, dim)?;
    let mut model = MultiLabelModel::zeros(targets.to_vec(), vocabulary, config.clone());
    if config.epochs == 0 {
        return Ok(model);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut weights: Vec<ScaledWeights> = targets.iter().map(|_| ScaledWeights::new(dim)).collect();
    let mut biases = vec![0.0; targets.len()];

    for epoch in 0..config.epochs {
        let lr = config.rate_at(epoch);
        order.shuffle(&mut rng);
        for &i in &order {
            let x = &examples[i].0;
            for (k, w) in weights.iter_mut().enumerate() {
                let p = sigmoid(w.dot(x) + biases[k]);
                let g = p - if labels[i][k] { 1.0 } else { 0.0 };
                w.shrink(1.0 - lr * config.l2);
                w.add_scaled(x, -lr * g);
                biases[k] -= lr * g;
            }
        }
    }

    model.weights = weights.into_iter().map(ScaledWeights::into_weights).collect();
    model.biases = biases;
    Ok(model)
}
