//! Linear-chain CRF over sparse token features, with BIO tag sets.

#![allow(clippy::needless_range_loop)]

mod bio;
mod inference;

pub use bio::{decode_bio_spans, encode_bio};
pub use inference::{forward_backward, log_sum_exp, marginals, viterbi, ForwardBackward, Marginals, Scores};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::persist::{format_tag, Versioned};
use crate::textproc::{FeatureVector, Vocabulary};

pub const OUTSIDE: &str = "O";

#[derive(Debug, Error, PartialEq)]
pub enum CrfError {
    #[error("empty token sequence")]
    EmptySequence,
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("label {label} at position {position} is outside the tag set")]
    LabelOutOfRange { position: usize, label: usize },
    #[error("unknown tag {0:?}")]
    UnknownTag(String),
    #[error("feature id {0} is outside the vocabulary")]
    FeatureOutOfRange(u32),
    #[error("no training examples")]
    NoExamples,
    #[error("invalid tag set: {0}")]
    InvalidTagSet(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

/// Ordered labels: `O`, then a `B-`/`I-` pair per category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TagSet {
    labels: Vec<String>,
}

impl TryFrom<Vec<String>> for TagSet {
    type Error = CrfError;

    fn try_from(labels: Vec<String>) -> Result<Self, CrfError> {
        let bad = |m: String| Err(CrfError::InvalidTagSet(m));
        if labels.first().map(String::as_str) != Some(OUTSIDE) {
            return bad("label 0 must be O".into());
        }
        let rest = &labels[1..];
        if !rest.len().is_multiple_of(2) {
            return bad("labels after O must come in B-/I- pairs".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for pair in rest.chunks(2) {
            let cat = match pair[0].strip_prefix("B-") {
                Some(c) if !c.is_empty() => c,
                _ => return bad(format!("expected a B- label, found {:?}", pair[0])),
            };
            if pair[1] != format!("I-{cat}") {
                return bad(format!("{:?} must be followed by I-{cat}", pair[0]));
            }
            if !seen.insert(cat.to_string()) {
                return bad(format!("duplicate category {cat}"));
            }
        }
        Ok(TagSet { labels })
    }
}

impl From<TagSet> for Vec<String> {
    fn from(t: TagSet) -> Self {
        t.labels
    }
}

impl TagSet {
    pub fn new<S: AsRef<str>>(categories: &[S]) -> Result<Self, CrfError> {
        let mut labels = vec![OUTSIDE.to_string()];
        for c in categories {
            labels.push(format!("B-{}", c.as_ref()));
            labels.push(format!("I-{}", c.as_ref()));
        }
        TagSet::try_from(labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.labels[1..].iter().step_by(2).map(|l| &l[2..])
    }

    pub fn encode<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>, CrfError> {
        labels
            .iter()
            .map(|l| {
                self.index(l.as_ref())
                    .ok_or_else(|| CrfError::UnknownTag(l.as_ref().to_string()))
            })
            .collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Vec<String> {
        indices.iter().map(|&i| self.labels[i].clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for CrfConfig {
    fn default() -> Self {
        CrfConfig {
            learning_rate: 0.1,
            epochs: 15,
            l2: 1e-4,
            seed: 7,
        }
    }
}

impl CrfConfig {
    pub fn validate(&self) -> Result<(), CrfError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CrfError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2 * self.learning_rate < 1.0) {
            return Err(CrfError::InvalidConfig(
                "l2 must be non-negative and l2 * learning_rate < 1".into(),
            ));
        }
        Ok(())
    }

    pub fn rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate / (1.0 + epoch as f64)
    }
}

/// Dense gradient in the model's parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradient {
    pub emissions: Vec<f64>,
    pub transitions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfModel {
    format: String,
    format_version: u64,
    pub tagset: TagSet,
    pub vocabulary: Vocabulary,
    /// `emissions[f * L + y]`
    pub emissions: Vec<f64>,
    /// `transitions[prev * L + cur]`
    pub transitions: Vec<f64>,
    pub config: CrfConfig,
    /// Regularized mean training loss after the last epoch.
    pub final_loss: Option<f64>,
}

impl Versioned for CrfModel {
    const FORMAT: &'static str = "sdoh-linear-crf";
    const VERSION: u64 = 1;
}

impl CrfModel {
    pub fn zeros(tagset: TagSet, vocabulary: Vocabulary, config: CrfConfig) -> Self {
        let l = tagset.len();
        CrfModel {
            format: format_tag::<Self>(),
            format_version: Self::VERSION,
            emissions: vec![0.0; vocabulary.len() * l],
            transitions: vec![0.0; l * l],
            tagset,
            vocabulary,
            config,
            final_loss: None,
        }
    }

    pub fn num_labels(&self) -> usize {
        self.tagset.len()
    }

    fn check_features(&self, feats: &[FeatureVector]) -> Result<(), CrfError> {
        if feats.is_empty() {
            return Err(CrfError::EmptySequence);
        }
        let dim = self.vocabulary.len();
        match feats.iter().filter_map(FeatureVector::max_id).max() {
            Some(id) if id as usize >= dim => Err(CrfError::FeatureOutOfRange(id)),
            _ => Ok(()),
        }
    }

    pub fn scores(&self, feats: &[FeatureVector]) -> Result<Scores, CrfError> {
        self.check_features(feats)?;
        Ok(build_scores(feats, &self.emissions, 1.0, &self.transitions, self.num_labels()))
    }

    pub fn log_partition(&self, feats: &[FeatureVector]) -> Result<f64, CrfError> {
        Ok(forward_backward(&self.scores(feats)?).log_z)
    }

    pub fn marginals(&self, feats: &[FeatureVector]) -> Result<Marginals, CrfError> {
        Ok(marginals(&self.scores(feats)?))
    }

    pub fn viterbi_decode(&self, feats: &[FeatureVector]) -> Result<Vec<usize>, CrfError> {
        Ok(viterbi(&self.scores(feats)?).0)
    }

    pub fn tag(&self, feats: &[FeatureVector]) -> Result<Vec<String>, CrfError> {
        Ok(self.tagset.decode(&self.viterbi_decode(feats)?))
    }

    fn check_gold(&self, feats: &[FeatureVector], gold: &[usize]) -> Result<(), CrfError> {
        self.check_features(feats)?;
        if feats.len() != gold.len() {
            return Err(CrfError::LengthMismatch {
                features: feats.len(),
                labels: gold.len(),
            });
        }
        match gold.iter().position(|&y| y >= self.num_labels()) {
            Some(position) => Err(CrfError::LabelOutOfRange {
                position,
                label: gold[position],
            }),
            None => Ok(()),
        }
    }

    /// `log Z − score(gold) + (l2/2)·|θ|²` and its gradient over all weights.
    pub fn nll_gradient(
        &self,
        feats: &[FeatureVector],
        gold: &[usize],
    ) -> Result<(f64, CrfGradient), CrfError> {
        self.check_gold(feats, gold)?;
        Ok(sequence_nll_gradient(
            feats,
            gold,
            &self.emissions,
            &self.transitions,
            self.num_labels(),
            self.config.l2,
        ))
    }

    fn squared_norm(&self) -> f64 {
        self.emissions
            .iter()
            .chain(&self.transitions)
            .map(|w| w * w)
            .sum()
    }

    /// Mean negative log-likelihood over `examples` plus the L2 term.
    pub fn training_loss(&self, examples: &[(Vec<FeatureVector>, Vec<usize>)]) -> Result<f64, CrfError> {
        if examples.is_empty() {
            return Err(CrfError::NoExamples);
        }
        let mut total = 0.0;
        for (feats, gold) in examples {
            self.check_gold(feats, gold)?;
            let scores = self.scores(feats)?;
            total += forward_backward(&scores).log_z - scores.path_score(gold);
        }
        Ok(total / examples.len() as f64 + 0.5 * self.config.l2 * self.squared_norm())
    }
}

/// Loss and gradient for raw parameters in the model layout. Inputs are
/// assumed valid; `CrfModel::nll_gradient` is the checked entry point.
pub fn sequence_nll_gradient(
    feats: &[FeatureVector],
    gold: &[usize],
    emissions: &[f64],
    transitions: &[f64],
    num_labels: usize,
    l2: f64,
) -> (f64, CrfGradient) {
    let l = num_labels;
    let scores = build_scores(feats, emissions, 1.0, transitions, l);
    let m = marginals(&scores);
    let mut grad = CrfGradient {
        emissions: emissions.iter().map(|w| l2 * w).collect(),
        transitions: transitions.iter().map(|w| l2 * w).collect(),
    };
    for (t, x) in feats.iter().enumerate() {
        for &(f, v) in x.entries() {
            let row = f as usize * l;
            for y in 0..l {
                grad.emissions[row + y] += v * m.unary[t][y];
            }
            grad.emissions[row + gold[t]] -= v;
        }
    }
    for (t, pair) in m.pairwise.iter().enumerate() {
        for p in 0..l {
            for y in 0..l {
                grad.transitions[p * l + y] += pair[p][y];
            }
        }
        grad.transitions[gold[t] * l + gold[t + 1]] -= 1.0;
    }
    let norm: f64 = emissions.iter().chain(transitions).map(|w| w * w).sum();
    let loss = m.log_z - scores.path_score(gold) + 0.5 * l2 * norm;
    (loss, grad)
}

fn build_scores(
    feats: &[FeatureVector],
    emissions: &[f64],
    scale: f64,
    transitions: &[f64],
    l: usize,
) -> Scores {
    let emit = feats
        .iter()
        .map(|x| {
            let mut row = vec![0.0; l];
            for &(f, v) in x.entries() {
                let base = f as usize * l;
                for (y, r) in row.iter_mut().enumerate() {
                    *r += v * emissions[base + y];
                }
            }
            row.iter_mut().for_each(|r| *r *= scale);
            row
        })
        .collect();
    let trans = transitions.chunks(l).map(<[f64]>::to_vec).collect();
    Scores { emit, trans }
}

/// Seeded SGD on the per-sequence objective, with `lr / (1 + epoch)` decay.
/// Emission updates stay sparse; L2 shrinkage goes through a shared scale.
pub fn train_crf(
    examples: &[(Vec<FeatureVector>, Vec<usize>)],
    tagset: TagSet,
    vocabulary: Vocabulary,
    config: &CrfConfig,
) -> Result<CrfModel, CrfError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(CrfError::NoExamples);
    }
    let mut model = CrfModel::zeros(tagset, vocabulary, config.clone());
    for (feats, gold) in examples {
        model.check_gold(feats, gold)?;
    }
    if config.epochs == 0 {
        return Ok(model);
    }

    let l = model.num_labels();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut emissions = std::mem::take(&mut model.emissions);
    let mut scale = 1.0;
    let mut transitions = std::mem::take(&mut model.transitions);

    for epoch in 0..config.epochs {
        let lr = config.rate_at(epoch);
        let shrink = 1.0 - lr * config.l2;
        order.shuffle(&mut rng);
        for &i in &order {
            let (feats, gold) = &examples[i];
            let scores = build_scores(feats, &emissions, scale, &transitions, l);
            let m = marginals(&scores);

            scale *= shrink;
            if scale < 1e-9 {
                emissions.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
            transitions.iter_mut().for_each(|w| *w *= shrink);

            let k = lr / scale;
            for (t, x) in feats.iter().enumerate() {
                for &(f, v) in x.entries() {
                    let row = f as usize * l;
                    for y in 0..l {
                        emissions[row + y] -= k * v * m.unary[t][y];
                    }
                    emissions[row + gold[t]] += k * v;
                }
            }
            for (t, pair) in m.pairwise.iter().enumerate() {
                for p in 0..l {
                    for y in 0..l {
                        transitions[p * l + y] -= lr * pair[p][y];
                    }
                }
                transitions[gold[t] * l + gold[t + 1]] += lr;
            }
        }
    }

    emissions.iter_mut().for_each(|w| *w *= scale);
    model.emissions = emissions;
    model.transitions = transitions;
    model.final_loss = Some(model.training_loss(examples)?);
    Ok(model)
}
