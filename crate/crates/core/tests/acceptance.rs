//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use capbias::corpus::Region;
use capbias::metaeval::{
    conflict_score, human_alignment, ranking_consistency, Correlation, HumanScoreVector, ScoreMatrix,
};
use capbias::metrics::{
    aggregate_bias, amplification, cooccurrence_amplification, sample_score, CooccurrenceTable, ScoringFunctionKind,
};
use capbias::pipeline::{evaluate, EvalConfig, ScorerSpec};
use capbias::preproc::{apply_region_mask, mask_caption, PixelGrid};
use capbias::schema::AttributeSchema;
use capbias::scorer::{train_bow_classifier, BowClassifierModel, BowConfig, BowSample, ClassDistribution};
use capbias::synth::{generate, SynthConfig};
use capbias::Stream;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn verdict(n: u32, pass: bool, detail: &str) {
    // straight to the handle so the line survives libtest's output capture
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_1_consistency_table() {
    let start = Instant::now();
    let m = ScoreMatrix::load(&fixture("consistency.csv")).unwrap();
    let lic_conflict = conflict_score(&m.column("lic_lstm").unwrap(), &m.column("lic_bert").unwrap()).unwrap();
    let ours_conflict = conflict_score(&m.column("ours_sat").unwrap(), &m.column("ours_grit").unwrap()).unwrap();
    let lic_rank = ranking_consistency(&m, "lic_lstm", "lic_bert", Correlation::Pearson).unwrap();
    let ours_rank = ranking_consistency(&m, "ours_sat", "ours_grit", Correlation::Pearson).unwrap();
    let elapsed = start.elapsed();
    let pass = (lic_conflict - 0.1111).abs() <= 1e-4
        && ours_conflict == 0.0
        && (lic_rank - 0.92).abs() <= 0.03
        && (ours_rank - 0.97).abs() <= 0.03
        && elapsed < Duration::from_secs(1);
    verdict(
        1,
        pass,
        &format!(
            "conflict lic={lic_conflict:.4} ours={ours_conflict}; consistency lic={lic_rank:.4} ours={ours_rank:.4}; {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_2_human_alignment() {
    let start = Instant::now();
    let m = ScoreMatrix::load(&fixture("anonymous_bench.csv")).unwrap();
    let human = HumanScoreVector::load(&fixture("anonymous_bench_human.csv")).unwrap();
    let ours = human_alignment(&m, "ours", &human).unwrap();
    let lic = human_alignment(&m, "lic", &human).unwrap();
    let elapsed = start.elapsed();
    let pass = (ours - 0.80).abs() <= 0.10 && (lic - 0.54).abs() <= 0.10 && elapsed < Duration::from_secs(1);
    verdict(2, pass, &format!("ours={ours:.4} lic={lic:.4}; {elapsed:?}"));
}

fn random_distribution(rng: &mut ChaCha8Rng, k: usize) -> ClassDistribution {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-12).collect();
    let total: f64 = raw.iter().sum();
    ClassDistribution::new("s", Stream::Gt, "rand", raw.iter().map(|r| r / total).collect()).unwrap()
}

#[test]
fn criterion_3_scoring_semantics() {
    use ScoringFunctionKind::*;
    let female = 1;
    let wrong = ClassDistribution::new("a", Stream::Gt, "t", vec![0.51, 0.49]).unwrap();
    let right = ClassDistribution::new("b", Stream::Gt, "t", vec![0.49, 0.51]).unwrap();
    let triple = |d: &ClassDistribution| {
        (sample_score(d, female, Leakage), sample_score(d, female, Lic), sample_score(d, female, Ours))
    };
    let worked = triple(&wrong) == (0.0, 0.0, 0.49) && triple(&right) == (1.0, 0.51, 0.51);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    for _ in 0..100_000 {
        let k = rng.random_range(2..=10);
        let d = random_distribution(&mut rng, k);
        let label = rng.random_range(0..k);
        let lic = sample_score(&d, label, Lic);
        if lic > sample_score(&d, label, Leakage).min(sample_score(&d, label, Ours)) {
            violations += 1;
        }
    }
    verdict(
        3,
        worked && violations == 0,
        &format!(
            "worked case {:?} / {:?}; dominance violations {violations} of 100000",
            triple(&wrong),
            triple(&right)
        ),
    );
}

#[test]
fn criterion_4_amplification_arithmetic() {
    let mut reader = csv::Reader::from_path(fixture("emotion_artemis.csv")).unwrap();
    let mut rows = 0;
    let mut mismatches = Vec::new();
    for row in reader.records() {
        let row = row.unwrap();
        let num = |i: usize| row[i].parse::<f64>().unwrap();
        for (m, d, amp) in [(3, 4, 5), (6, 7, 8)] {
            let got = amplification(num(m), num(d));
            // table values carry two decimals
            if (got * 100.0).round() != (num(amp) * 100.0).round() {
                mismatches.push(format!("{} {}: {got}", &row[0], &row[1]));
            }
        }
        rows += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let antisymmetric = (0..10_000).all(|_| {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        amplification(a, b) == -amplification(b, a) && amplification(a, a) == 0.0
    });
    verdict(
        4,
        rows == 6 && mismatches.is_empty() && antisymmetric,
        &format!("{rows} rows, mismatches {mismatches:?}, antisymmetry {antisymmetric}"),
    );
}

#[test]
fn criterion_5_unbiased_baseline() {
    let mut ok = Vec::new();
    for (k, n) in [(2usize, 1000usize), (2, 37), (9, 900)] {
        let dists: Vec<ClassDistribution> =
            (0..n).map(|i| ClassDistribution::uniform(format!("s{i}"), Stream::Model, "const", k)).collect();
        let labels: HashMap<String, usize> = (0..n).map(|i| (format!("s{i}"), i % k)).collect();
        let b = aggregate_bias(&dists, &labels, ScoringFunctionKind::Ours).unwrap();
        ok.push((k, b, b == 1.0 / k as f64));
    }

    // one deterministic scorer on identical inputs
    let mut recs = generate(&SynthConfig { n_records: 200, seed: 5, ..SynthConfig::default() });
    for r in &mut recs {
        r.model_caption = Some(r.gt_captions[0].clone());
    }
    let mut zero_amp = true;
    for spec in [ScorerSpec::Bow(BowConfig::default()), ScorerSpec::PromptNgram(Default::default())] {
        let out = evaluate(&recs, &AttributeSchema::gender(), &EvalConfig::new("same", spec)).unwrap();
        zero_amp &= out.reports.iter().all(|r| r.b_amp == 0.0);
    }
    let pass = ok.iter().all(|(_, _, e)| *e) && zero_amp;
    verdict(5, pass, &format!("uniform aggregates {ok:?}; identical streams give b_amp = 0: {zero_amp}"));
}

fn ours_amp(n: usize, gt_skew: f64, model_skew: f64, seed: u64) -> f64 {
    let recs = generate(&SynthConfig { n_records: n, gt_captions_per_record: 3, gt_skew, model_skew, seed });
    let mut cfg = EvalConfig::new(
        "synthetic",
        ScorerSpec::Bow(BowConfig { epochs: 200, learning_rate: 1.0, ..BowConfig::default() }),
    );
    cfg.seed = seed;
    cfg.scoring_fns = vec![ScoringFunctionKind::Ours];
    evaluate(&recs, &AttributeSchema::gender(), &cfg).unwrap().reports[0].b_amp
}

#[test]
fn criterion_6_synthetic_sensitivity() {
    let start = Instant::now();
    let seeds = [11u64, 12, 13, 14, 15];
    let biased: Vec<f64> = seeds.iter().map(|&s| ours_amp(2000, 0.6, 0.9, s)).collect();
    let resampled: Vec<f64> = seeds.iter().map(|&s| ours_amp(2000, 0.6, 0.6, s)).collect();
    let elapsed = start.elapsed();
    let pass = biased.iter().all(|&a| a > 0.0)
        && resampled.iter().all(|a| a.abs() <= 0.02)
        && elapsed < Duration::from_secs(30);
    verdict(6, pass, &format!("b_amp 60/40 vs 90/10 {biased:.4?}; 60/40 vs 60/40 {resampled:.4?}; {elapsed:?}"));
}

const FILLER: &[&str] = &["a", "the", "on", "with", "dog", "street", "riding", "bike", "table", "of", "near", "red"];

fn fuzz_caption(rng: &mut ChaCha8Rng, lexicon: &[&str]) -> String {
    let n = rng.random_range(1..14);
    (0..n)
        .map(|_| {
            let mut w = if rng.random_bool(0.3) {
                lexicon[rng.random_range(0..lexicon.len())].to_string()
            } else {
                FILLER[rng.random_range(0..FILLER.len())].to_string()
            };
            if rng.random_bool(0.3) {
                w = w.to_uppercase();
            } else if rng.random_bool(0.2) {
                let mut c = w.chars();
                w = c.next().map(|f| f.to_uppercase().collect::<String>() + c.as_str()).unwrap_or_default();
            }
            match rng.random_range(0..8) {
                0 => format!("{w},"),
                1 => format!("{w}."),
                2 => format!("\"{w}\""),
                3 => format!("({w})"),
                4 => format!("{w}!"),
                _ => w,
            }
        })
        .collect::<Vec<_>>()
        .join(if rng.random_bool(0.1) { "  " } else { " " })
}

/// Pixel sample at integer `(x, y)` inside a polygon, by counting edge
/// crossings of a vertical ray towards negative y.
fn inside_vertical_ray(pts: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    for i in 0..pts.len() {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % pts.len()];
        if (x0 < x) != (x1 < x) {
            let yc = y0 + (x - x0) * (y1 - y0) / (x1 - x0);
            if yc < y {
                inside = !inside;
            }
        }
    }
    inside
}

fn off_grid(rng: &mut ChaCha8Rng, limit: u32) -> f64 {
    // keeps vertices off integer lines so no sample sits on an edge
    rng.random_range(0..limit) as f64 + rng.random_range(0.05..0.95)
}

#[test]
fn criterion_7_masking_suite() {
    let schema = AttributeSchema::gender();
    let lexicon: Vec<String> = schema.mask_lexicon().values().flatten().cloned().collect();
    let lex_refs: Vec<&str> = lexicon.iter().map(String::as_str).collect();
    let lex_set: BTreeSet<&str> = lex_refs.iter().copied().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut survivors = 0;
    let mut not_idempotent = 0;
    for _ in 0..10_000 {
        let caption = fuzz_caption(&mut rng, &lex_refs);
        let once = mask_caption(&caption, &schema).unwrap();
        let joined = once.joined();
        for raw in joined.split_whitespace() {
            let word = raw.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase();
            if lex_set.contains(word.as_str()) {
                survivors += 1;
            }
        }
        if mask_caption(&joined, &schema).unwrap().tokens != once.tokens {
            not_idempotent += 1;
        }
    }

    let (w, h) = (48u32, 40u32);
    let mut pixel_mismatches = 0;
    for case in 0..100 {
        let region = if case % 2 == 0 {
            let (xa, xb) = (off_grid(&mut rng, w), off_grid(&mut rng, w));
            let (ya, yb) = (off_grid(&mut rng, h), off_grid(&mut rng, h));
            let (x0, x1) = (xa.min(xb), xa.max(xb) + 0.5);
            let (y0, y1) = (ya.min(yb), ya.max(yb) + 0.5);
            Region::bbox(x0, y0, x1.min(w as f64), y1.min(h as f64))
        } else {
            let n = rng.random_range(3..9);
            Region::Polygon((0..n).map(|_| (off_grid(&mut rng, w), off_grid(&mut rng, h))).collect())
        };
        let expected: usize = match &region {
            Region::Box { x_min, y_min, x_max, y_max } => {
                ((x_max.ceil() - x_min.ceil()) * (y_max.ceil() - y_min.ceil())) as usize
            }
            Region::Polygon(pts) => (0..h)
                .flat_map(|y| (0..w).map(move |x| (x, y)))
                .filter(|&(x, y)| inside_vertical_ray(pts, x as f64, y as f64))
                .count(),
        };
        let img = PixelGrid::filled(w, h, 3, 200);
        let (masked, count) = apply_region_mask(&img, std::slice::from_ref(&region)).unwrap();
        let zeros = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| masked.get(0, x, y) == 0).count();
        if count != expected || zeros != expected {
            pixel_mismatches += 1;
        }
    }
    verdict(
        7,
        survivors == 0 && not_idempotent == 0 && pixel_mismatches == 0,
        &format!(
            "10000 fuzz captions: {survivors} survivors, {not_idempotent} non-idempotent; 100 regions: {pixel_mismatches} pixel-count mismatches"
        ),
    );
}

fn max_gradient_error(rng: &mut ChaCha8Rng) -> f64 {
    let vocab = ["dress", "beard", "kitchen", "tie", "ball", "cake", "car", "park"];
    let samples: Vec<BowSample> = (0..30)
        .map(|_| BowSample {
            tokens: (0..rng.random_range(1..6)).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect(),
            label: rng.random_range(0..3),
        })
        .collect();
    let classes: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let mut model = BowClassifierModel::initialize(&samples, &classes, 1);
    let params: Vec<f64> = (0..model.num_params()).map(|_| rng.random_range(-2.0..2.0)).collect();
    model.set_params(&params);
    let (_, analytic) = model.loss_and_gradient(&samples);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] = params[i] + h;
        model.set_params(&p);
        let up = model.loss_and_gradient(&samples).0;
        p[i] = params[i] - h;
        model.set_params(&p);
        let down = model.loss_and_gradient(&samples).0;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

fn brute_force_amplification(gt: &BTreeMap<String, Vec<u64>>, model: &BTreeMap<String, Vec<u64>>, k: usize) -> f64 {
    let vocab: Vec<&String> = gt.keys().filter(|v| gt[*v].iter().sum::<u64>() > 0).collect();
    if vocab.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for a in 0..k {
        for v in &vocab {
            let row = &gt[*v];
            let b_star = row[a] as f64 / row.iter().sum::<u64>() as f64;
            if b_star > 1.0 / k as f64 {
                if let Some(m) = model.get(*v).filter(|m| m.iter().sum::<u64>() > 0) {
                    total += m[a] as f64 / m.iter().sum::<u64>() as f64 - b_star;
                }
            }
        }
    }
    total / vocab.len() as f64
}

#[test]
fn criterion_8_numerical_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let grad_err = (0..5).map(|_| max_gradient_error(&mut rng)).fold(0.0, f64::max);

    let recs = generate(&SynthConfig { n_records: 300, seed: 8, ..SynthConfig::default() });
    let schema = AttributeSchema::gender();
    let samples: Vec<BowSample> = recs
        .iter()
        .map(|r| BowSample {
            tokens: mask_caption(&r.gt_captions[0], &schema).unwrap().tokens,
            label: schema.class_index(&r.attribute_label).unwrap(),
        })
        .collect();
    let model =
        train_bow_classifier(&samples, schema.classes(), &BowConfig { epochs: 100, ..BowConfig::default() }).unwrap();
    let hist = &model.training_meta.loss_history;
    let monotone = hist.windows(2).all(|w| w[1] <= w[0] + 1e-6);

    let mut cooc_mismatches = 0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=4);
        let classes: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
        let nv = rng.random_range(1..=20);
        let mut table = |p_missing: f64| -> BTreeMap<String, Vec<u64>> {
            let mut out = BTreeMap::new();
            for v in 0..nv {
                if !rng.random_bool(p_missing) {
                    out.insert(format!("w{v}"), (0..k).map(|_| rng.random_range(0..6u64)).collect());
                }
            }
            out
        };
        let gt = table(0.0);
        let model_counts = table(0.2);
        let got = cooccurrence_amplification(
            &CooccurrenceTable::from_counts(classes.clone(), gt.clone()),
            &CooccurrenceTable::from_counts(classes, model_counts.clone()),
        );
        let want = brute_force_amplification(&gt, &model_counts, k);
        if (got - want).abs() > 1e-12 {
            cooc_mismatches += 1;
        }
    }
    verdict(
        8,
        grad_err <= 1e-4 && monotone && cooc_mismatches == 0,
        &format!(
            "max gradient relative error {grad_err:.2e}; loss non-increasing over {} epochs: {monotone}; co-occurrence mismatches {cooc_mismatches} of 1000",
            hist.len() - 1
        ),
    );
}
