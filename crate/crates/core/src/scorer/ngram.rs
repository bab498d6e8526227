//! Generative answer-slot model for prompts.
//!
//! Training prompts are read with the answer slot filled by the label token.
//! The model tabulates answer unigram counts and, for every context token,
//! how often it precedes each answer (a skip-bigram from each prefix token to
//! the slot). Add-k smoothed counts are the closed-form maximizer of the
//! factored likelihood
//!
//! ```text
//! P(answer, prefix, image) = P(answer) * prod_t P(t | answer) * prod_b P(b | answer)^h_b
//! ```
//!
//! where `h_b` is the masked image's normalized grayscale histogram. Scoring
//! teacher-forces the prefix and reads the posterior at the slot, restricted
//! to the class tokens.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{softmax, ClassDistribution, ScorerError};
use crate::preproc::{gray_histogram, PixelGrid, PromptSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub smoothing_k: f64,
    pub seed: u64,
    /// Grayscale histogram buckets for image conditioning; 0 disables it.
    pub image_buckets: usize,
}

impl Default for NgramConfig {
    fn default() -> Self {
        Self { smoothing_k: 0.1, seed: 0, image_buckets: 8 }
    }
}

/// One training prompt with its answer and optional masked image.
#[derive(Debug, Clone)]
pub struct PromptTrainingSample<'a> {
    pub prompt: &'a PromptSample,
    pub answer: usize,
    pub image: Option<&'a PixelGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptNgramModel {
    pub scorer_id: String,
    classes: Vec<String>,
    smoothing_k: f64,
    seed: u64,
    /// Prompts per answer.
    answer_counts: Vec<u64>,
    /// Context token -> per-answer occurrence counts.
    pair_counts: BTreeMap<String, Vec<u64>>,
    /// Total context tokens per answer.
    context_totals: Vec<u64>,
    image_buckets: usize,
    /// Bucket-major `image_buckets x |A|` histogram mass.
    image_counts: Vec<f64>,
    image_totals: Vec<f64>,
}

pub fn train_prompt_model(
    samples: &[PromptTrainingSample<'_>],
    classes: &[String],
    config: &NgramConfig,
) -> Result<PromptNgramModel, ScorerError> {
    if !(config.smoothing_k >= 0.0 && config.smoothing_k.is_finite()) {
        return Err(ScorerError::Contract(format!("smoothing_k must be >= 0, got {}", config.smoothing_k)));
    }
    let k = classes.len();
    let mut model = PromptNgramModel {
        scorer_id: "prompt_ngram".into(),
        classes: classes.to_vec(),
        smoothing_k: config.smoothing_k,
        seed: config.seed,
        answer_counts: vec![0; k],
        pair_counts: BTreeMap::new(),
        context_totals: vec![0; k],
        image_buckets: config.image_buckets,
        image_counts: vec![0.0; config.image_buckets * k],
        image_totals: vec![0.0; k],
    };
    for s in samples {
        if !s.prompt.is_well_formed() {
            return Err(ScorerError::Contract(format!(
                "prompt {} does not end in a single [Answer] slot",
                s.prompt.sample_id
            )));
        }
        if s.answer >= k {
            return Err(ScorerError::Contract(format!("answer index {} out of range", s.answer)));
        }
        model.answer_counts[s.answer] += 1;
        for t in s.prompt.context() {
            model.pair_counts.entry(t.clone()).or_insert_with(|| vec![0; k])[s.answer] += 1;
            model.context_totals[s.answer] += 1;
        }
        if let (Some(img), true) = (s.image, config.image_buckets > 0) {
            for (b, h) in gray_histogram(img, config.image_buckets).into_iter().enumerate() {
                model.image_counts[b * k + s.answer] += h;
            }
            model.image_totals[s.answer] += 1.0;
        }
    }
    Ok(model)
}

impl PromptNgramModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn smoothing_k(&self) -> f64 {
        self.smoothing_k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocabulary_size(&self) -> usize {
        self.pair_counts.len()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.pair_counts.keys().map(String::as_str)
    }

    pub fn pair_count(&self, token: &str, class: usize) -> u64 {
        self.pair_counts.get(token).map_or(0, |c| c[class])
    }

    pub fn answer_count(&self, class: usize) -> u64 {
        self.answer_counts[class]
    }

    /// Smoothed `P(token | answer)` over the context vocabulary.
    pub fn context_token_probability(&self, token: &str, class: usize) -> f64 {
        let v = self.pair_counts.len() as f64;
        let denom = self.context_totals[class] as f64 + self.smoothing_k * v;
        if denom == 0.0 {
            return 0.0;
        }
        (self.pair_count(token, class) as f64 + self.smoothing_k) / denom
    }

    /// Smoothed answer prior.
    pub fn answer_prior(&self, class: usize) -> f64 {
        let n: u64 = self.answer_counts.iter().sum();
        let denom = n as f64 + self.smoothing_k * self.classes.len() as f64;
        if denom == 0.0 {
            return 1.0 / self.classes.len() as f64;
        }
        (self.answer_counts[class] as f64 + self.smoothing_k) / denom
    }

    fn image_probability(&self, bucket: usize, class: usize) -> f64 {
        let k = self.classes.len();
        let denom = self.image_totals[class] + self.smoothing_k * self.image_buckets as f64;
        if denom == 0.0 {
            return 0.0;
        }
        (self.image_counts[bucket * k + class] + self.smoothing_k) / denom
    }

    /// Unnormalized log posterior at the slot.
    pub fn answer_log_scores(&self, prompt: &PromptSample, image: Option<&PixelGrid>) -> Vec<f64> {
        let k = self.classes.len();
        let mut scores: Vec<f64> = (0..k).map(|a| self.answer_prior(a).ln()).collect();
        for t in prompt.context() {
            if !self.pair_counts.contains_key(t) {
                continue;
            }
            for (a, s) in scores.iter_mut().enumerate() {
                *s += self.context_token_probability(t, a).ln();
            }
        }
        let use_image = self.image_buckets > 0 && self.image_totals.iter().any(|&t| t > 0.0);
        if let (Some(img), true) = (image, use_image) {
            for (b, h) in gray_histogram(img, self.image_buckets).into_iter().enumerate() {
                if h == 0.0 {
                    continue;
                }
                for (a, s) in scores.iter_mut().enumerate() {
                    *s += h * self.image_probability(b, a).ln();
                }
            }
        }
        scores
    }
}

/// Answer-slot distribution over the class tokens.
///
/// When every class has zero likelihood (only possible with `k = 0`), the
/// context is dropped and the answer unigram distribution is returned.
pub fn answer_probability(
    model: &PromptNgramModel,
    prompt: &PromptSample,
    masked_image: Option<&PixelGrid>,
) -> ClassDistribution {
    let scores = model.answer_log_scores(prompt, masked_image);
    let probs = if scores.iter().all(|s| *s == f64::NEG_INFINITY) {
        let n: u64 = model.answer_counts.iter().sum();
        model.answer_counts.iter().map(|&c| c as f64 / n as f64).collect()
    } else {
        softmax(&scores)
    };
    ClassDistribution::new(&prompt.sample_id, prompt.stream, model.scorer_id.clone(), probs)
        .expect("normalized answer distribution")
}
