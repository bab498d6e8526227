use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::schema::AttributeSchema;
use crate::text;

/// Token/class co-occurrence counts over a caption set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceTable {
    classes: Vec<String>,
    counts: BTreeMap<String, Vec<u64>>,
}

impl CooccurrenceTable {
    /// Builds a table from raw counts; tokens with all-zero rows are dropped.
    pub fn from_counts(classes: Vec<String>, counts: BTreeMap<String, Vec<u64>>) -> Self {
        let k = classes.len();
        let counts = counts
            .into_iter()
            .filter(|(_, row)| {
                assert_eq!(row.len(), k, "count row arity");
                row.iter().any(|&c| c > 0)
            })
            .collect();
        Self { classes, counts }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, token: &str, class: usize) -> u64 {
        self.counts.get(token).map_or(0, |row| row[class])
    }

    /// `c(v, a) / sum_a' c(v, a')`, or `None` when `v` never occurs.
    pub fn bias(&self, token: &str, class: usize) -> Option<f64> {
        let row = self.counts.get(token)?;
        let total: u64 = row.iter().sum();
        (total > 0).then(|| row[class] as f64 / total as f64)
    }
}

/// Counts every token occurrence of each caption against the caption's class.
/// Lexicon words, reserved tokens and bare punctuation are not part of the vocabulary.
pub fn cooccurrence_bias(captions: &[(&str, usize)], schema: &AttributeSchema) -> CooccurrenceTable {
    let k = schema.num_classes();
    let mut counts: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for &(caption, label) in captions {
        for tok in text::tokenize(caption) {
            if schema.is_masked_token(&tok) || text::is_reserved(&tok) || text::is_punctuation(&tok) {
                continue;
            }
            counts.entry(tok).or_insert_with(|| vec![0; k])[label] += 1;
        }
    }
    CooccurrenceTable::from_counts(schema.classes().to_vec(), counts)
}

/// Mean over the reference vocabulary of the bias shift on positively
/// correlated pairs: `(1/|V|) sum_a sum_{v: b*(v,a) > 1/|A|} (b~(v,a) - b*(v,a))`.
///
/// Tokens the generated captions never use contribute nothing.
pub fn cooccurrence_amplification(gt: &CooccurrenceTable, model: &CooccurrenceTable) -> f64 {
    let v = gt.vocabulary_size();
    if v == 0 {
        return 0.0;
    }
    let k = gt.classes.len();
    let threshold = 1.0 / k as f64;
    let mut total = 0.0;
    for token in gt.vocabulary() {
        for a in 0..k {
            let b_star = gt.bias(token, a).expect("token in vocabulary");
            if b_star <= threshold {
                continue;
            }
            if let Some(b_tilde) = model.bias(token, a) {
                total += b_tilde - b_star;
            }
        }
    }
    total / v as f64
}
