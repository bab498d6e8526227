use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CaptionRecord, CorpusError};

/// Fewest records per class that still give every split one sample.
pub const MIN_PER_CLASS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Attribute-balanced 70/10/20 assignment. Downsampled records are absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub assignments: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, sample_id: &str) -> Option<Split> {
        self.assignments.get(sample_id).copied()
    }

    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.assignments.iter().filter(move |(_, s)| **s == split).map(|(id, _)| id.as_str())
    }

    pub fn len(&self, split: Split) -> usize {
        self.ids(split).count()
    }

    pub fn retained(&self) -> usize {
        self.assignments.len()
    }

    /// `sample_id<TAB>split` lines in id order.
    pub fn to_tsv(&self) -> String {
        self.assignments.iter().map(|(id, s)| format!("{id}\t{s}\n")).collect()
    }
}

/// Per-class split sizes: val and test rounded from 10% and 20% (at least
/// one each), train takes the remainder.
pub fn per_class_sizes(n: usize) -> (usize, usize, usize) {
    let val = ((n as f64 * 0.1).round() as usize).max(1);
    let test = ((n as f64 * 0.2).round() as usize).max(1);
    (n - val - test, val, test)
}

/// Downsamples every class to the minority count with a seeded shuffle, then
/// cuts each class 70/10/20 so every split holds the same count per class.
pub fn make_splits(records: &[CaptionRecord], seed: u64) -> Result<SplitAssignment, CorpusError> {
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in records {
        by_class.entry(&r.attribute_label).or_default().push(&r.sample_id);
    }
    if by_class.len() < 2 {
        let class = by_class.keys().next().copied().unwrap_or("<none>");
        return Err(CorpusError::InsufficientData {
            class: class.to_string(),
            count: by_class.values().next().map_or(0, Vec::len),
            needed: MIN_PER_CLASS,
        });
    }
    if let Some((class, ids)) = by_class.iter().find(|(_, ids)| ids.len() < MIN_PER_CLASS) {
        return Err(CorpusError::InsufficientData {
            class: class.to_string(),
            count: ids.len(),
            needed: MIN_PER_CLASS,
        });
    }
    let n = by_class.values().map(Vec::len).min().expect("non-empty");
    let (train, val, _) = per_class_sizes(n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = BTreeMap::new();
    for ids in by_class.values_mut() {
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for (i, id) in ids.iter().take(n).enumerate() {
            let split = if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            };
            assignments.insert(id.to_string(), split);
        }
    }
    Ok(SplitAssignment { seed, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(male: usize, female: usize) -> Vec<CaptionRecord> {
        (0..male + female)
            .map(|i| {
                let label = if i < male { "male" } else { "female" };
                CaptionRecord::new(format!("r{i:03}"), label, "a person")
            })
            .collect()
    }

    fn count(records: &[CaptionRecord], a: &SplitAssignment, split: Split, label: &str) -> usize {
        records.iter().filter(|r| r.attribute_label == label && a.get(&r.sample_id) == Some(split)).count()
    }

    #[test]
    fn balanced_hundred() {
        let recs = records(50, 50);
        let a = make_splits(&recs, 7).unwrap();
        assert_eq!((a.len(Split::Train), a.len(Split::Val), a.len(Split::Test)), (70, 10, 20));
        for s in [Split::Train, Split::Val, Split::Test] {
            assert_eq!(count(&recs, &a, s, "male"), count(&recs, &a, s, "female"));
        }
    }

    #[test]
    fn skewed_hundred_downsamples_to_eighty() {
        let recs = records(60, 40);
        let a = make_splits(&recs, 7).unwrap();
        assert_eq!(a.retained(), 2 * 40);
        assert_eq!((a.len(Split::Train), a.len(Split::Val), a.len(Split::Test)), (56, 8, 16));
        for s in [Split::Train, Split::Val, Split::Test] {
            assert_eq!(count(&recs, &a, s, "male"), count(&recs, &a, s, "female"));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let recs = records(30, 25);
        let a = make_splits(&recs, 11).unwrap();
        let b = make_splits(&recs, 11).unwrap();
        assert_eq!(a.to_tsv(), b.to_tsv());
        let c = make_splits(&recs, 12).unwrap();
        assert_ne!(a.to_tsv(), c.to_tsv());
    }

    #[test]
    fn input_order_does_not_matter() {
        let recs = records(20, 20);
        let mut rev = recs.clone();
        rev.reverse();
        assert_eq!(make_splits(&recs, 3).unwrap(), make_splits(&rev, 3).unwrap());
    }

    #[test]
    fn small_class_is_named() {
        let recs = records(10, 4);
        match make_splits(&recs, 1) {
            Err(CorpusError::InsufficientData { class, count, .. }) => {
                assert_eq!(class, "female");
                assert_eq!(count, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn five_per_class_fills_every_split() {
        assert_eq!(per_class_sizes(5), (3, 1, 1));
        let recs = records(5, 5);
        let a = make_splits(&recs, 0).unwrap();
        assert_eq!((a.len(Split::Train), a.len(Split::Val), a.len(Split::Test)), (6, 2, 2));
    }
}
