//! Attribute-probability sources: a bag-of-words classifier, a prompt
//! answer-slot model, and a reader for externally produced scores.

mod bow;
mod distribution;
mod external;
mod ngram;

use serde::{Deserialize, Serialize};

use crate::preproc::{PixelGrid, PromptSample};

pub use bow::{score_with_bow, train_bow_classifier, BowClassifierModel, BowConfig, BowSample, TrainingMeta};
pub use distribution::ClassDistribution;
pub use external::{format_interchange_line, parse_interchange, read_external_scores, write_interchange};
pub use ngram::{answer_probability, train_prompt_model, NgramConfig, PromptNgramModel, PromptTrainingSample};

#[derive(Debug, thiserror::Error)]
pub enum ScorerError {
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("line {line}: schema mismatch: expected classes {expected:?}, got {got:?}")]
    Schema { line: usize, expected: Vec<String>, got: Vec<String> },
    #[error("interchange file not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Numerically stable softmax. `-inf` entries get probability zero.
pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// A trained built-in scorer, serializable as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedScorer {
    Bow(BowClassifierModel),
    PromptNgram(PromptNgramModel),
}

impl TrainedScorer {
    pub fn scorer_id(&self) -> &str {
        match self {
            TrainedScorer::Bow(m) => &m.scorer_id,
            TrainedScorer::PromptNgram(m) => &m.scorer_id,
        }
    }

    pub fn set_scorer_id(&mut self, id: impl Into<String>) {
        match self {
            TrainedScorer::Bow(m) => m.scorer_id = id.into(),
            TrainedScorer::PromptNgram(m) => m.scorer_id = id.into(),
        }
    }

    pub fn classes(&self) -> &[String] {
        match self {
            TrainedScorer::Bow(m) => m.classes(),
            TrainedScorer::PromptNgram(m) => m.classes(),
        }
    }

    /// Scores one prompt. The bag-of-words model sees the masked caption
    /// (`caption_len` leading tokens); the prompt model reads the answer slot.
    pub fn score(&self, prompt: &PromptSample, caption_len: usize, image: Option<&PixelGrid>) -> ClassDistribution {
        match self {
            TrainedScorer::Bow(m) => {
                let caption = &prompt.prompt_tokens[..caption_len.min(prompt.prompt_tokens.len())];
                score_with_bow(m, caption, &prompt.sample_id, prompt.stream)
            }
            TrainedScorer::PromptNgram(m) => answer_probability(m, prompt, image),
        }
    }
}
