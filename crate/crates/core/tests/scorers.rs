use std::collections::{BTreeMap, BTreeSet, HashMap};

use capbias::pipeline::{prepare_caption, PreparedSample};
use capbias::preproc::PromptSample;
use capbias::schema::AttributeSchema;
use capbias::scorer::{
    score_with_bow, train_bow_classifier, train_prompt_model, BowConfig, BowSample, NgramConfig, PromptTrainingSample,
    TrainedScorer,
};
use capbias::Stream;

fn prepared<S: AsRef<str>>(captions: &[(S, &str)], stream: Stream) -> Vec<PreparedSample> {
    let g = AttributeSchema::gender();
    captions
        .iter()
        .enumerate()
        .map(|(i, (c, label))| {
            prepare_caption(&format!("s{i}"), g.class_index(label).unwrap(), c.as_ref(), &g, stream).unwrap()
        })
        .collect()
}

fn separable() -> Vec<(String, &'static str)> {
    let scenes = ["in a park", "on a bench", "near a tree", "at home", "by the sea"];
    let mut out = Vec::new();
    for scene in scenes {
        out.push((format!("a woman in a red dress {scene}"), "female"));
        out.push((format!("a man with a beard {scene}"), "male"));
        out.push((format!("she wears a dress {scene} today"), "female"));
        out.push((format!("his beard is long {scene} today"), "male"));
    }
    out
}

/// Bayes-optimal labels for each distinct masked bag of tokens, by counting.
fn bayes_oracle(samples: &[BowSample]) -> HashMap<BTreeSet<String>, usize> {
    let mut counts: HashMap<BTreeSet<String>, [usize; 2]> = HashMap::new();
    for s in samples {
        counts.entry(s.tokens.iter().cloned().collect()).or_default()[s.label] += 1;
    }
    counts.into_iter().map(|(bag, c)| (bag, if c[1] > c[0] { 1 } else { 0 })).collect()
}

#[test]
fn bow_fits_separable_corpus_like_the_bayes_oracle() {
    let data = prepared(&separable(), Stream::Gt);
    assert_eq!(data.len(), 20);
    let samples: Vec<BowSample> =
        data.iter().map(|p| BowSample { tokens: p.masked.masked_caption.clone(), label: p.label }).collect();
    let oracle = bayes_oracle(&samples);
    let oracle_acc =
        samples.iter().filter(|s| oracle[&s.tokens.iter().cloned().collect::<BTreeSet<_>>()] == s.label).count();
    assert_eq!(oracle_acc, samples.len(), "corpus must be separable");

    let g = AttributeSchema::gender();
    let model =
        train_bow_classifier(&samples, g.classes(), &BowConfig { epochs: 100, ..BowConfig::default() }).unwrap();
    for s in &samples {
        let d = score_with_bow(&model, &s.tokens, "s", Stream::Gt);
        let bag: BTreeSet<String> = s.tokens.iter().cloned().collect();
        assert_eq!(d.argmax(), oracle[&bag], "{:?}", s.tokens);
    }
}

/// Direct-probability posterior from freshly counted tables.
fn naive_bayes_oracle(train: &[(PromptSample, usize)], probe: &PromptSample, k: f64) -> Vec<f64> {
    let mut prior = [0.0f64; 2];
    let mut tok: BTreeMap<&str, [f64; 2]> = BTreeMap::new();
    let mut totals = [0.0f64; 2];
    for (p, a) in train {
        prior[*a] += 1.0;
        for t in &p.prompt_tokens[..p.prompt_tokens.len() - 1] {
            tok.entry(t.as_str()).or_default()[*a] += 1.0;
            totals[*a] += 1.0;
        }
    }
    let v = tok.len() as f64;
    let n = prior[0] + prior[1];
    let mut joint = [0.0; 2];
    for a in 0..2 {
        let mut p = (prior[a] + k) / (n + 2.0 * k);
        for t in &probe.prompt_tokens[..probe.prompt_tokens.len() - 1] {
            if let Some(c) = tok.get(t.as_str()) {
                p *= (c[a] + k) / (totals[a] + k * v);
            }
        }
        joint[a] = p;
    }
    let z = joint[0] + joint[1];
    vec![joint[0] / z, joint[1] / z]
}

#[test]
fn prompt_model_matches_direct_naive_bayes() {
    let corpus = [
        ("a woman cooking in a kitchen", "female"),
        ("a girl in a kitchen with a cake", "female"),
        ("a lady holding an umbrella", "female"),
        ("a man riding a skateboard", "male"),
        ("a boy with a skateboard in a park", "male"),
        ("a man in a kitchen", "male"),
        ("a gentleman wearing a tie", "male"),
    ];
    let train: Vec<(PromptSample, usize)> =
        prepared(&corpus, Stream::Gt).into_iter().map(|p| (p.prompt, p.label)).collect();
    let g = AttributeSchema::gender();
    for k in [0.1, 0.5, 1.0] {
        let samples: Vec<PromptTrainingSample<'_>> =
            train.iter().map(|(p, a)| PromptTrainingSample { prompt: p, answer: *a, image: None }).collect();
        let model =
            train_prompt_model(&samples, g.classes(), &NgramConfig { smoothing_k: k, ..NgramConfig::default() })
                .unwrap();
        let scorer = TrainedScorer::PromptNgram(model);
        for probe in ["a person in a kitchen", "someone on a skateboard", "an umbrella and a tie", "zebra"] {
            let p = prepared(&[(probe, "male")], Stream::Model).remove(0);
            let got = scorer.score(&p.prompt, p.caption_len(), None);
            let want = naive_bayes_oracle(&train, &p.prompt, k);
            for (g, w) in got.probs().iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "k={k} {probe}: {:?} vs {want:?}", got.probs());
            }
        }
    }
}

#[test]
fn self_assessment_is_plain_wiring() {
    let data = prepared(&separable(), Stream::Gt);
    let g = AttributeSchema::gender();
    let samples: Vec<BowSample> =
        data.iter().map(|p| BowSample { tokens: p.masked.masked_caption.clone(), label: p.label }).collect();
    let mut model = TrainedScorer::Bow(train_bow_classifier(&samples, g.classes(), &BowConfig::default()).unwrap());
    model.set_scorer_id("captioner-x");

    let gt = prepared(&[("a woman in a red dress in a park", "female")], Stream::Gt).remove(0);
    let model_side = prepared(&[("a woman in a red dress in a park", "female")], Stream::Model).remove(0);
    let a = model.score(&gt.prompt, gt.caption_len(), None);
    let b = model.score(&model_side.prompt, model_side.caption_len(), None);
    assert_eq!(a.stream, Stream::Gt);
    assert_eq!(b.stream, Stream::Model);
    assert_eq!(a.scorer_id, "captioner-x");
    assert_eq!(a.scorer_id, b.scorer_id);
    assert_eq!(a.probs(), b.probs());
}
