use serde::{Deserialize, Serialize};

use super::ScorerError;
use crate::Stream;

/// Tolerance on the probability sum of a stored distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Probability vector over the schema's classes for one sample and stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub sample_id: String,
    pub stream: Stream,
    pub scorer_id: String,
    probs: Vec<f64>,
}

impl ClassDistribution {
    pub fn new(
        sample_id: impl Into<String>,
        stream: Stream,
        scorer_id: impl Into<String>,
        probs: Vec<f64>,
    ) -> Result<Self, ScorerError> {
        if probs.len() < 2 {
            return Err(ScorerError::InvalidDistribution(format!("{} classes", probs.len())));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ScorerError::InvalidDistribution(format!("entry {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ScorerError::InvalidDistribution(format!("probabilities sum to {sum}")));
        }
        Ok(Self { sample_id: sample_id.into(), stream, scorer_id: scorer_id.into(), probs })
    }

    pub fn uniform(sample_id: impl Into<String>, stream: Stream, scorer_id: impl Into<String>, classes: usize) -> Self {
        Self::new(sample_id, stream, scorer_id, vec![1.0 / classes as f64; classes])
            .expect("uniform distribution is valid")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates() {
        assert!(ClassDistribution::new("s", Stream::Gt, "x", vec![0.7, 0.7]).is_err());
        assert!(ClassDistribution::new("s", Stream::Gt, "x", vec![1.0]).is_err());
        assert!(ClassDistribution::new("s", Stream::Gt, "x", vec![-0.1, 1.1]).is_err());
        assert!(ClassDistribution::new("s", Stream::Gt, "x", vec![0.3, 0.7]).is_ok());
    }

    #[test]
    fn argmax_ties_to_lowest() {
        let d = ClassDistribution::uniform("s", Stream::Model, "x", 3);
        assert_eq!(d.argmax(), 0);
        let d = ClassDistribution::new("s", Stream::Gt, "x", vec![0.2, 0.4, 0.4]).unwrap();
        assert_eq!(d.argmax(), 1);
    }
}
