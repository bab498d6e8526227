//! Two-stream evaluation: mask, prompt, train a scorer, score the reference
//! and generated captions of the test split, and report amplification.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::{make_splits, CaptionRecord, CorpusError, Split, SplitAssignment};
use crate::metrics::{aggregate_bias_with, BiasReport, MetricsError, ScoringFunctionKind};
use crate::par::Exec;
use crate::preproc::{
    apply_region_mask, build_prompt, mask_caption, MaskedSample, PixelGrid, PreprocError, PromptSample,
};
use crate::schema::AttributeSchema;
use crate::scorer::{
    train_bow_classifier, train_prompt_model, BowConfig, BowSample, ClassDistribution, NgramConfig,
    PromptTrainingSample, ScorerError, TrainedScorer,
};
use crate::Stream;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("sample {sample_id}: {source}")]
    Preproc {
        sample_id: String,
        #[source]
        source: PreprocError,
    },
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("{stream} stream: {source}")]
    Metrics {
        stream: Stream,
        #[source]
        source: MetricsError,
    },
    #[error("record {sample_id}: label {label:?} is not a schema class")]
    UnknownLabel { sample_id: String, label: String },
    #[error("image for {sample_id}: {source}")]
    Image {
        sample_id: String,
        #[source]
        source: PreprocError,
    },
}

/// Which scorer produces the class distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerSpec {
    Bow(BowConfig),
    PromptNgram(NgramConfig),
    /// Precomputed distributions for the reference and generated streams.
    External {
        gt: Vec<ClassDistribution>,
        model: Vec<ClassDistribution>,
    },
}

/// What a built-in scorer is trained on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// One scorer trained on reference captions judges both streams.
    #[default]
    Shared,
    /// Each stream is judged by a scorer trained on that stream's captions.
    PerStream,
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub model_id: String,
    pub scorer: ScorerSpec,
    /// Overrides the scorer's own id in reports and distributions.
    pub scorer_id: Option<String>,
    pub training: TrainingMode,
    pub scoring_fns: Vec<ScoringFunctionKind>,
    pub seed: u64,
    pub exec: Exec,
    /// Directory that `image_ref`s resolve against. Images are only read for
    /// the prompt scorer.
    pub image_dir: Option<PathBuf>,
    /// Black out regions before scoring (also requires the schema to allow it).
    pub mask_images: bool,
}

impl EvalConfig {
    pub fn new(model_id: impl Into<String>, scorer: ScorerSpec) -> Self {
        Self {
            model_id: model_id.into(),
            scorer,
            scorer_id: None,
            training: TrainingMode::Shared,
            scoring_fns: ScoringFunctionKind::ALL.to_vec(),
            seed: 0,
            exec: Exec::default(),
            image_dir: None,
            mask_images: true,
        }
    }
}

/// A caption after masking and prompting.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub label: usize,
    pub masked: MaskedSample,
    pub prompt: PromptSample,
}

impl PreparedSample {
    pub fn caption_len(&self) -> usize {
        self.masked.masked_caption.len()
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub reports: Vec<BiasReport>,
    pub splits: SplitAssignment,
    pub gt_scores: Vec<ClassDistribution>,
    pub model_scores: Vec<ClassDistribution>,
    /// Trained scorers: one when shared, gt then model when per-stream, none for external.
    pub scorers: Vec<TrainedScorer>,
}

/// Masks one caption, verifies no lexicon token survived, and builds its prompt.
pub fn prepare_caption(
    sample_id: &str,
    label: usize,
    caption: &str,
    schema: &AttributeSchema,
    stream: Stream,
) -> Result<PreparedSample, PipelineError> {
    let wrap = |source| PipelineError::Preproc { sample_id: sample_id.to_string(), source };
    let masked = MaskedSample::from_text(sample_id, mask_caption(caption, schema).map_err(wrap)?);
    masked.check(schema).map_err(wrap)?;
    let prompt = build_prompt(&masked, schema, stream).map_err(wrap)?;
    Ok(PreparedSample { label, masked, prompt })
}

fn label_of(record: &CaptionRecord, schema: &AttributeSchema) -> Result<usize, PipelineError> {
    schema.class_index(&record.attribute_label).ok_or_else(|| PipelineError::UnknownLabel {
        sample_id: record.sample_id.clone(),
        label: record.attribute_label.clone(),
    })
}

/// Loads each record's image and blacks out its regions.
fn load_images(
    records: &[&CaptionRecord],
    config: &EvalConfig,
    schema: &AttributeSchema,
) -> Result<HashMap<String, PixelGrid>, PipelineError> {
    let Some(dir) = &config.image_dir else {
        return Ok(HashMap::new());
    };
    let mask = config.mask_images && schema.mask_images();
    let loaded = config.exec.try_map(records, |r| {
        let Some(image_ref) = &r.image_ref else {
            return Ok::<_, PipelineError>(None);
        };
        let wrap = |source| PipelineError::Image { sample_id: r.sample_id.clone(), source };
        let img = PixelGrid::load(&dir.join(image_ref)).map_err(wrap)?;
        let img = if mask { apply_region_mask(&img, &r.regions).map_err(wrap)?.0 } else { img };
        Ok(Some((r.sample_id.clone(), img)))
    })?;
    Ok(loaded.into_iter().flatten().collect())
}

/// Trains a built-in scorer on prepared samples. External specs are a contract error.
pub fn train_scorer(
    spec: &ScorerSpec,
    samples: &[PreparedSample],
    images: &HashMap<String, PixelGrid>,
    schema: &AttributeSchema,
    seed: u64,
) -> Result<TrainedScorer, PipelineError> {
    match spec {
        ScorerSpec::Bow(cfg) => {
            let data: Vec<BowSample> =
                samples.iter().map(|s| BowSample { tokens: s.masked.masked_caption.clone(), label: s.label }).collect();
            let cfg = BowConfig { seed, ..cfg.clone() };
            Ok(TrainedScorer::Bow(train_bow_classifier(&data, schema.classes(), &cfg)?))
        }
        ScorerSpec::PromptNgram(cfg) => {
            let data: Vec<PromptTrainingSample<'_>> = samples
                .iter()
                .map(|s| PromptTrainingSample {
                    prompt: &s.prompt,
                    answer: s.label,
                    image: images.get(&s.prompt.sample_id),
                })
                .collect();
            let cfg = NgramConfig { seed, ..cfg.clone() };
            Ok(TrainedScorer::PromptNgram(train_prompt_model(&data, schema.classes(), &cfg)?))
        }
        ScorerSpec::External { .. } => Err(ScorerError::Contract("external scores are not trained".into()).into()),
    }
}

fn score_all(
    scorer: &TrainedScorer,
    samples: &[PreparedSample],
    images: &HashMap<String, PixelGrid>,
    exec: Exec,
) -> Vec<ClassDistribution> {
    exec.map(samples, |s| scorer.score(&s.prompt, s.caption_len(), images.get(&s.prompt.sample_id)))
}

/// Runs the full two-stream evaluation on the test split.
pub fn evaluate(
    records: &[CaptionRecord],
    schema: &AttributeSchema,
    config: &EvalConfig,
) -> Result<EvalOutput, PipelineError> {
    let splits = make_splits(records, config.seed)?;
    let in_split = |r: &&CaptionRecord, s: Split| splits.get(&r.sample_id) == Some(s);
    let train_recs: Vec<&CaptionRecord> = records.iter().filter(|r| in_split(r, Split::Train)).collect();
    let test_recs: Vec<&CaptionRecord> = records.iter().filter(|r| in_split(r, Split::Test)).collect();

    let mut labels = HashMap::new();
    for r in &test_recs {
        labels.insert(r.sample_id.clone(), label_of(r, schema)?);
    }

    let (gt_scores, model_scores, scorers) = match &config.scorer {
        ScorerSpec::External { gt, model } => {
            let pick = |ds: &[ClassDistribution]| -> Vec<ClassDistribution> {
                ds.iter().filter(|d| labels.contains_key(&d.sample_id)).cloned().collect()
            };
            (pick(gt), pick(model), Vec::new())
        }
        spec => {
            let needs_images = matches!(spec, ScorerSpec::PromptNgram(c) if c.image_buckets > 0);
            let images = if needs_images {
                let all: Vec<&CaptionRecord> = train_recs.iter().chain(&test_recs).copied().collect();
                load_images(&all, config, schema)?
            } else {
                HashMap::new()
            };

            let gt_train = prepare_stream(&train_recs, schema, Stream::Gt, true, config.exec)?;
            let gt_test = prepare_stream(&test_recs, schema, Stream::Gt, false, config.exec)?;
            let model_test = prepare_stream(&test_recs, schema, Stream::Model, false, config.exec)?;

            let shared = train_scorer(spec, &gt_train, &images, schema, config.seed)?;
            let mut scorers = vec![shared];
            if config.training == TrainingMode::PerStream {
                let model_train = prepare_stream(&train_recs, schema, Stream::Model, true, config.exec)?;
                scorers.push(train_scorer(spec, &model_train, &images, schema, config.seed)?);
            }
            if let Some(id) = &config.scorer_id {
                scorers.iter_mut().for_each(|s| s.set_scorer_id(id.clone()));
            }
            let gt_scores = score_all(&scorers[0], &gt_test, &images, config.exec);
            let model_scores = score_all(scorers.last().expect("one scorer"), &model_test, &images, config.exec);
            (gt_scores, model_scores, scorers)
        }
    };

    let scorer_id = config
        .scorer_id
        .clone()
        .or_else(|| gt_scores.first().map(|d| d.scorer_id.clone()))
        .unwrap_or_else(|| "external".into());
    let mut reports = Vec::with_capacity(config.scoring_fns.len());
    for &kind in &config.scoring_fns {
        let b_d = aggregate_bias_with(config.exec, &gt_scores, &labels, kind)
            .map_err(|source| PipelineError::Metrics { stream: Stream::Gt, source })?;
        let b_m = aggregate_bias_with(config.exec, &model_scores, &labels, kind)
            .map_err(|source| PipelineError::Metrics { stream: Stream::Model, source })?;
        reports.push(BiasReport::new(
            &config.model_id,
            &scorer_id,
            schema.name(),
            kind,
            b_d,
            b_m,
            gt_scores.len(),
            model_scores.len(),
        ));
    }
    Ok(EvalOutput { reports, splits, gt_scores, model_scores, scorers })
}

/// Masks and prompts one stream of `records`. Training uses every reference
/// caption; scoring uses the first. Records without a generated caption are
/// absent from the model stream.
pub fn prepare_stream(
    records: &[&CaptionRecord],
    schema: &AttributeSchema,
    stream: Stream,
    all_references: bool,
    exec: Exec,
) -> Result<Vec<PreparedSample>, PipelineError> {
    let mut jobs: Vec<(&str, &str, &str)> = Vec::new();
    for r in records {
        match stream {
            Stream::Gt if all_references => jobs
                .extend(r.gt_captions.iter().map(|c| (r.sample_id.as_str(), r.attribute_label.as_str(), c.as_str()))),
            Stream::Gt => jobs.push((&r.sample_id, &r.attribute_label, r.primary_gt_caption())),
            Stream::Model => {
                if let Some(c) = &r.model_caption {
                    jobs.push((&r.sample_id, &r.attribute_label, c));
                }
            }
        }
    }
    exec.try_map(&jobs, |&(id, label, caption)| {
        let label = schema
            .class_index(label)
            .ok_or_else(|| PipelineError::UnknownLabel { sample_id: id.to_string(), label: label.to_string() })?;
        prepare_caption(id, label, caption, schema, stream)
    })
}

/// Amplification across seeds for one scoring function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub scoring_fn: ScoringFunctionKind,
    pub seeds: Vec<u64>,
    pub b_amp: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (zero for a single seed).
    pub std_dev: f64,
}

/// Repeats [`evaluate`] per seed and summarizes `b_amp`.
pub fn evaluate_seeds(
    records: &[CaptionRecord],
    schema: &AttributeSchema,
    config: &EvalConfig,
    seeds: &[u64],
) -> Result<Vec<SeedSummary>, PipelineError> {
    let mut per_kind: Vec<Vec<f64>> = vec![Vec::new(); config.scoring_fns.len()];
    for &seed in seeds {
        let cfg = EvalConfig { seed, ..config.clone() };
        let out = evaluate(records, schema, &cfg)?;
        for (i, r) in out.reports.iter().enumerate() {
            per_kind[i].push(r.b_amp);
        }
    }
    let kinds: BTreeSet<_> = config.scoring_fns.iter().collect();
    debug_assert_eq!(kinds.len(), config.scoring_fns.len());
    Ok(config
        .scoring_fns
        .iter()
        .zip(per_kind)
        .map(|(&kind, values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var =
                if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            SeedSummary { scoring_fn: kind, seeds: seeds.to_vec(), b_amp: values, mean, std_dev: var.sqrt() }
        })
        .collect())
}
