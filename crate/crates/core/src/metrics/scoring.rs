use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::par::{compensated_sum, Exec};
use crate::scorer::ClassDistribution;

/// How a sample's class distribution turns into a bias contribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringFunctionKind {
    /// Correct-prediction indicator.
    Leakage,
    /// Confidence in the true class, counted only when the prediction is correct.
    Lic,
    /// Confidence in the true class, unconditionally.
    Ours,
}

impl ScoringFunctionKind {
    pub const ALL: [ScoringFunctionKind; 3] = [Self::Leakage, Self::Lic, Self::Ours];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Leakage => "leakage",
            Self::Lic => "lic",
            Self::Ours => "ours",
        }
    }
}

impl fmt::Display for ScoringFunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoringFunctionKind {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "leakage" => Ok(Self::Leakage),
            "lic" => Ok(Self::Lic),
            "ours" => Ok(Self::Ours),
            other => Err(MetricsError::UnknownScoringFunction(other.to_string())),
        }
    }
}

/// Score of one sample whose true class index is `true_label`.
pub fn sample_score(dist: &ClassDistribution, true_label: usize, kind: ScoringFunctionKind) -> f64 {
    let confidence = dist.probs()[true_label];
    let correct = dist.argmax() == true_label;
    match kind {
        ScoringFunctionKind::Leakage => f64::from(u8::from(correct)),
        ScoringFunctionKind::Lic => {
            if correct {
                confidence
            } else {
                0.0
            }
        }
        ScoringFunctionKind::Ours => confidence,
    }
}

/// Mean sample score over one stream. `labels` maps sample ids to class indices.
pub fn aggregate_bias(
    dists: &[ClassDistribution],
    labels: &HashMap<String, usize>,
    kind: ScoringFunctionKind,
) -> Result<f64, MetricsError> {
    aggregate_bias_with(Exec::default(), dists, labels, kind)
}

pub fn aggregate_bias_with(
    exec: Exec,
    dists: &[ClassDistribution],
    labels: &HashMap<String, usize>,
    kind: ScoringFunctionKind,
) -> Result<f64, MetricsError> {
    if dists.is_empty() {
        return Err(MetricsError::EmptyStream);
    }
    let scores = exec.try_map(dists, |d| {
        let label = *labels.get(&d.sample_id).ok_or_else(|| MetricsError::MissingLabel(d.sample_id.clone()))?;
        if label >= d.num_classes() {
            return Err(MetricsError::Arity {
                sample_id: d.sample_id.clone(),
                expected: label + 1,
                got: d.num_classes(),
            });
        }
        Ok(sample_score(d, label, kind))
    })?;
    Ok(compensated_sum(scores) / dists.len() as f64)
}

/// Model bias minus dataset bias.
pub fn amplification(b_m: f64, b_d: f64) -> f64 {
    b_m - b_d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Stream;

    fn dist(p: &[f64]) -> ClassDistribution {
        ClassDistribution::new("s", Stream::Gt, "x", p.to_vec()).unwrap()
    }

    const FEMALE: usize = 1;

    #[test]
    fn confidence_near_half_case() {
        // male 0.51, female 0.49, truth female
        let d = dist(&[0.51, 0.49]);
        assert_eq!(sample_score(&d, FEMALE, ScoringFunctionKind::Leakage), 0.0);
        assert_eq!(sample_score(&d, FEMALE, ScoringFunctionKind::Lic), 0.0);
        assert_eq!(sample_score(&d, FEMALE, ScoringFunctionKind::Ours), 0.49);
        let d = dist(&[0.49, 0.51]);
        assert_eq!(sample_score(&d, FEMALE, ScoringFunctionKind::Leakage), 1.0);
        assert_eq!(sample_score(&d, FEMALE, ScoringFunctionKind::Lic), 0.51);
        assert_eq!(sample_score(&d, FEMALE, ScoringFunctionKind::Ours), 0.51);
    }

    #[test]
    fn uniform_binary_is_half() {
        let d = dist(&[0.5, 0.5]);
        assert_eq!(sample_score(&d, 0, ScoringFunctionKind::Ours), 0.5);
        assert_eq!(sample_score(&d, 1, ScoringFunctionKind::Ours), 0.5);
    }

    #[test]
    fn mean_of_two() {
        let a = ClassDistribution::new("a", Stream::Gt, "x", vec![0.6, 0.4]).unwrap();
        let b = ClassDistribution::new("b", Stream::Gt, "x", vec![0.4, 0.6]).unwrap();
        let labels = HashMap::from([("a".to_string(), 1), ("b".to_string(), 1)]);
        let v = aggregate_bias(&[a, b], &labels, ScoringFunctionKind::Ours).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn certain_and_correct_gives_one() {
        let ds: Vec<_> = (0..4)
            .map(|i| {
                let mut p = vec![0.0, 0.0];
                p[i % 2] = 1.0;
                ClassDistribution::new(format!("s{i}"), Stream::Gt, "x", p).unwrap()
            })
            .collect();
        let labels: HashMap<_, _> = (0..4).map(|i| (format!("s{i}"), i % 2)).collect();
        for k in ScoringFunctionKind::ALL {
            assert_eq!(aggregate_bias(&ds, &labels, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(matches!(
            aggregate_bias(&[], &HashMap::new(), ScoringFunctionKind::Ours),
            Err(MetricsError::EmptyStream)
        ));
        let d = dist(&[0.5, 0.5]);
        assert!(matches!(
            aggregate_bias(&[d], &HashMap::new(), ScoringFunctionKind::Ours),
            Err(MetricsError::MissingLabel(_))
        ));
    }

    #[test]
    fn amplification_arithmetic() {
        assert!((amplification(0.553, 0.504) - 0.049).abs() < 1e-12);
        assert_eq!(amplification(0.7, 0.7), 0.0);
    }

    #[test]
    fn parses_kinds() {
        for k in ScoringFunctionKind::ALL {
            assert_eq!(k.as_str().parse::<ScoringFunctionKind>().unwrap(), k);
        }
        assert!("bleu".parse::<ScoringFunctionKind>().is_err());
    }
}
