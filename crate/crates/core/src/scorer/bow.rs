//! Multinomial logistic regression over bag-of-words features.
//!
//! Features are token counts scaled to unit L2 norm, so every sample has
//! `|x|^2 <= 1` and, with the bias column, the cross-entropy Hessian is
//! bounded by 1. Any learning rate below 2 therefore gives a monotone
//! full-batch descent.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{softmax, ClassDistribution, ScorerError};
use crate::Stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub min_count: usize,
    /// `None` trains full-batch; `Some(n)` shuffles into mini-batches of `n` each epoch.
    #[serde(default)]
    pub batch_size: Option<usize>,
}

impl Default for BowConfig {
    fn default() -> Self {
        Self { epochs: 40, learning_rate: 0.1, seed: 0, min_count: 1, batch_size: None }
    }
}

/// A masked caption with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct BowSample {
    pub tokens: Vec<String>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub final_loss: f64,
    /// Training loss before the first update, then after every epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowClassifierModel {
    pub scorer_id: String,
    classes: Vec<String>,
    vocabulary: BTreeMap<String, usize>,
    /// Row-major `|V| x |A|`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    pub training_meta: TrainingMeta,
}

type Features = Vec<(usize, f64)>;

impl BowClassifierModel {
    /// Untrained model: zero weights over a vocabulary built from `samples`.
    pub fn initialize(samples: &[BowSample], classes: &[String], min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in samples {
            for t in &s.tokens {
                *counts.entry(t).or_default() += 1;
            }
        }
        let vocabulary: BTreeMap<String, usize> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .enumerate()
            .map(|(i, (t, _))| (t.to_string(), i))
            .collect();
        let k = classes.len();
        Self {
            scorer_id: "bow".into(),
            classes: classes.to_vec(),
            weights: vec![0.0; vocabulary.len() * k],
            bias: vec![0.0; k],
            vocabulary,
            training_meta: TrainingMeta {
                epochs: 0,
                learning_rate: 0.0,
                seed: 0,
                final_loss: f64::NAN,
                loss_history: Vec::new(),
            },
        }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Flattened parameters: weights then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params(), "parameter length");
        let (w, b) = params.split_at(self.weights.len());
        self.weights.copy_from_slice(w);
        self.bias.copy_from_slice(b);
    }

    /// Sparse unit-norm count features; unknown tokens are dropped.
    pub fn featurize(&self, tokens: &[String]) -> Features {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(&i) = self.vocabulary.get(t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
        counts.into_iter().map(|(i, v)| (i, v / norm)).collect()
    }

    /// Raw linear class scores.
    pub fn logits(&self, x: &Features) -> Vec<f64> {
        let k = self.classes.len();
        let mut z = self.bias.clone();
        for &(j, v) in x {
            for (a, zi) in z.iter_mut().enumerate() {
                *zi += v * self.weights[j * k + a];
            }
        }
        z
    }

    pub fn predict_proba(&self, tokens: &[String]) -> Vec<f64> {
        softmax(&self.logits(&self.featurize(tokens)))
    }

    /// Mean cross-entropy over `samples` and its gradient in [`params`](Self::params) order.
    pub fn loss_and_gradient(&self, samples: &[BowSample]) -> (f64, Vec<f64>) {
        let feats: Vec<Features> = samples.iter().map(|s| self.featurize(&s.tokens)).collect();
        let refs: Vec<(&Features, usize)> = feats.iter().zip(samples).map(|(f, s)| (f, s.label)).collect();
        self.loss_grad_features(&refs)
    }

    fn loss_grad_features(&self, batch: &[(&Features, usize)]) -> (f64, Vec<f64>) {
        let k = self.classes.len();
        let nw = self.weights.len();
        let mut grad = vec![0.0; self.num_params()];
        let mut loss = 0.0;
        for &(x, label) in batch {
            let z = self.logits(x);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - z[label];
            for a in 0..k {
                let g = (z[a] - lse).exp() - if a == label { 1.0 } else { 0.0 };
                for &(j, v) in x.iter() {
                    grad[j * k + a] += v * g;
                }
                grad[nw + a] += g;
            }
        }
        let n = batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }
}

/// Gradient descent on multinomial cross-entropy from zero initialization.
pub fn train_bow_classifier(
    samples: &[BowSample],
    classes: &[String],
    config: &BowConfig,
) -> Result<BowClassifierModel, ScorerError> {
    if classes.len() < 2 {
        return Err(ScorerError::DegenerateData(format!("{} classes in schema", classes.len())));
    }
    if let Some(s) = samples.iter().find(|s| s.label >= classes.len()) {
        return Err(ScorerError::Contract(format!("label index {} out of range", s.label)));
    }
    let mut present: Vec<usize> = samples.iter().map(|s| s.label).collect();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(ScorerError::DegenerateData(format!(
            "need at least two classes in the training data, found {}",
            present.len()
        )));
    }

    let mut model = BowClassifierModel::initialize(samples, classes, config.min_count);
    let feats: Vec<Features> = samples.iter().map(|s| model.featurize(&s.tokens)).collect();
    let all: Vec<(&Features, usize)> = feats.iter().zip(samples).map(|(f, s)| (f, s.label)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..all.len()).collect();

    let mut history = Vec::with_capacity(config.epochs + 1);
    let mut params = model.params();
    for _ in 0..config.epochs {
        match config.batch_size {
            None | Some(0) => {
                let (loss, grad) = model.loss_grad_features(&all);
                history.push(loss);
                step(&mut params, &grad, config.learning_rate);
                model.set_params(&params);
            }
            Some(size) => {
                history.push(model.loss_grad_features(&all).0);
                order.shuffle(&mut rng);
                for chunk in order.chunks(size) {
                    let batch: Vec<(&Features, usize)> = chunk.iter().map(|&i| all[i]).collect();
                    let (_, grad) = model.loss_grad_features(&batch);
                    step(&mut params, &grad, config.learning_rate);
                    model.set_params(&params);
                }
            }
        }
    }
    let final_loss = model.loss_grad_features(&all).0;
    history.push(final_loss);
    model.training_meta = TrainingMeta {
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        seed: config.seed,
        final_loss,
        loss_history: history,
    };
    Ok(model)
}

fn step(params: &mut [f64], grad: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
}

pub fn score_with_bow(
    model: &BowClassifierModel,
    masked_caption: &[String],
    sample_id: &str,
    stream: Stream,
) -> ClassDistribution {
    ClassDistribution::new(sample_id, stream, model.scorer_id.clone(), model.predict_proba(masked_caption))
        .expect("softmax output is a distribution")
}
