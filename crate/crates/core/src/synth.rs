//! Synthetic gender-captioning corpora with a planted object/gender skew.
//!
//! Every record mentions one object. With probability `skew` the object comes
//! from the pool associated with the record's gender, otherwise from the other
//! pool, so a skew of 0.5 carries no signal and 1.0 is fully stereotyped.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CaptionRecord;

const MALE_OBJECTS: &[&str] =
    &["skateboard", "surfboard", "tie", "baseball", "truck", "motorcycle", "frisbee", "laptop"];
const FEMALE_OBJECTS: &[&str] = &["umbrella", "handbag", "kitchen", "flowers", "cake", "teddy", "kite", "toothbrush"];
const MALE_WORDS: &[&str] = &["man", "boy", "gentleman", "man"];
const FEMALE_WORDS: &[&str] = &["woman", "girl", "lady", "woman"];
const VERBS: &[&str] = &["holding", "near", "with", "looking at", "next to", "using"];
const SCENES: &[&str] = &["in a park", "on a street", "in a room", "at the beach", "outside", "by a table"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_records: usize,
    pub gt_captions_per_record: usize,
    /// Probability that a reference caption uses an object from the label's pool.
    pub gt_skew: f64,
    /// Same for the generated caption.
    pub model_skew: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n_records: 1000, gt_captions_per_record: 3, gt_skew: 0.6, model_skew: 0.9, seed: 0 }
    }
}

fn caption(rng: &mut ChaCha8Rng, female: bool, skew: f64) -> String {
    let own = rng.random_bool(skew);
    let pool = if female == own { FEMALE_OBJECTS } else { MALE_OBJECTS };
    let person = if female { FEMALE_WORDS } else { MALE_WORDS };
    let pronoun = if female { "her" } else { "his" };
    let object = pool.choose(rng).expect("non-empty");
    let verb = VERBS.choose(rng).expect("non-empty");
    let scene = SCENES.choose(rng).expect("non-empty");
    if rng.random_bool(0.5) {
        format!("a {} {verb} a {object} {scene}", person.choose(rng).expect("non-empty"))
    } else {
        format!("a person {verb} {pronoun} {object} {scene}")
    }
}

/// Balanced male/female records with reference and generated captions.
pub fn generate(config: &SynthConfig) -> Vec<CaptionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.n_records)
        .map(|i| {
            let female = i % 2 == 1;
            let label = if female { "female" } else { "male" };
            let gts: Vec<String> =
                (0..config.gt_captions_per_record.max(1)).map(|_| caption(&mut rng, female, config.gt_skew)).collect();
            let model = caption(&mut rng, female, config.model_skew);
            let mut rec = CaptionRecord::new(format!("syn{i:06}"), label, String::new());
            rec.gt_captions = gts;
            rec.model_caption = Some(model);
            rec
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn own_pool_rate(records: &[CaptionRecord], model: bool) -> f64 {
        let mut own = 0;
        let mut total = 0;
        for r in records {
            let female = r.attribute_label == "female";
            let caps: Vec<&str> = if model {
                vec![r.model_caption.as_deref().unwrap()]
            } else {
                r.gt_captions.iter().map(String::as_str).collect()
            };
            for c in caps {
                let pool = if female { FEMALE_OBJECTS } else { MALE_OBJECTS };
                own += usize::from(c.split_whitespace().any(|t| pool.contains(&t)));
                total += 1;
            }
        }
        own as f64 / total as f64
    }

    #[test]
    fn skews_are_planted() {
        let recs = generate(&SynthConfig { n_records: 4000, ..SynthConfig::default() });
        assert!((own_pool_rate(&recs, false) - 0.6).abs() < 0.02);
        assert!((own_pool_rate(&recs, true) - 0.9).abs() < 0.02);
    }

    #[test]
    fn deterministic_and_balanced() {
        let cfg = SynthConfig { n_records: 40, ..SynthConfig::default() };
        assert_eq!(generate(&cfg), generate(&cfg));
        let recs = generate(&cfg);
        assert_eq!(recs.iter().filter(|r| r.attribute_label == "male").count(), 20);
    }
}
