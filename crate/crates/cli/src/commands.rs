use std::collections::HashMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use capbias::corpus::{
    attach_model_captions, attach_regions, ingest_corpus, make_splits, CaptionRecord, Ingested, Split,
};
use capbias::metaeval::{
    conflict_score, human_alignment_with, ranking_consistency, Correlation, HumanScoreVector, ScoreMatrix,
};
use capbias::metrics::{BiasReport, ScoringFunctionKind};
use capbias::par::Exec;
use capbias::pipeline::{self, evaluate, prepare_stream, EvalConfig, ScorerSpec};
use capbias::schema::AttributeSchema;
use capbias::scorer::{read_external_scores, write_interchange, BowConfig, NgramConfig, TrainedScorer};
use capbias::synth::{generate, SynthConfig};
use capbias::Stream;

use crate::config::{corpus_format, load_schema, FormatName};
use crate::error::{CliError, CliResult};
use crate::{
    FormatArg, IngestArgs, MaskArgs, MetaevalArgs, ReportArgs, SchemaArgs, ScoreArgs, ScorerKindArg, SplitArg,
    StreamArg, SynthArgs, TrainArgs,
};

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records serialize"));
        out.push('\n');
    }
    out
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let source = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn schema_of(args: &SchemaArgs) -> CliResult<AttributeSchema> {
    load_schema(&args.attribute, args.lexicon.as_deref())
}

/// Ingests a corpus and attaches optional generated captions and regions.
pub fn load_corpus(
    input: &Path,
    format: &capbias::corpus::CorpusFormat,
    schema: &AttributeSchema,
    model_captions: Option<&Path>,
    regions: Option<&Path>,
) -> CliResult<Ingested> {
    let mut ingested = ingest_corpus(input, schema, format)?;
    if let Some(p) = model_captions {
        let rejected = attach_model_captions(&mut ingested.records, p)?;
        ingested.rejections.extend(rejected);
    }
    if let Some(p) = regions {
        let rejected = attach_regions(&mut ingested.records, p)?;
        ingested.rejections.extend(rejected);
    }
    Ok(ingested)
}

pub fn ingest(args: &IngestArgs) -> CliResult<()> {
    let schema = schema_of(&args.schema)?;
    let name = match args.format {
        FormatArg::PlainTsv => FormatName::PlainTsv,
        FormatArg::Coco => FormatName::Coco,
        FormatArg::Artemis => FormatName::Artemis,
    };
    if name == FormatName::Coco && args.attributes.is_none() {
        return Err(CliError::config("--attributes is required for the coco format"));
    }
    let format = corpus_format(name, args.attributes.clone());
    let ingested = load_corpus(&args.input, &format, &schema, args.model_captions.as_deref(), args.regions.as_deref())?;
    write_file(&args.out, &to_jsonl(&ingested.records))?;
    if let Some(p) = &args.rejections {
        write_file(p, &ingested.rejection_report())?;
    }
    eprintln!("ingested {} records, rejected {}", ingested.records.len(), ingested.rejections.len());
    Ok(())
}

fn split_filter(records: &[CaptionRecord], split: Option<SplitArg>, seed: u64) -> CliResult<Vec<&CaptionRecord>> {
    let Some(split) = split else {
        return Ok(records.iter().collect());
    };
    let want = match split {
        SplitArg::Train => Split::Train,
        SplitArg::Val => Split::Val,
        SplitArg::Test => Split::Test,
    };
    let assignment = make_splits(records, seed)?;
    Ok(records.iter().filter(|r| assignment.get(&r.sample_id) == Some(want)).collect())
}

pub fn mask(args: &MaskArgs) -> CliResult<()> {
    let schema = schema_of(&args.schema)?;
    let records: Vec<CaptionRecord> = read_jsonl(&args.records)?;
    let selected = split_filter(&records, args.split, args.seed)?;
    let stream = match args.stream {
        StreamArg::Gt => Stream::Gt,
        StreamArg::Model => Stream::Model,
    };
    let prepared = prepare_stream(&selected, &schema, stream, false, Exec::default())?;
    let prompts: Vec<_> = prepared.into_iter().map(|p| p.prompt).collect();
    write_file(&args.out, &to_jsonl(&prompts))?;
    eprintln!("wrote {} prompts", prompts.len());
    Ok(())
}

pub fn train_scorer(args: &TrainArgs) -> CliResult<()> {
    let schema = schema_of(&args.schema)?;
    let records: Vec<CaptionRecord> = read_jsonl(&args.records)?;
    let train = split_filter(&records, Some(SplitArg::Train), args.seed)?;
    let samples = prepare_stream(&train, &schema, Stream::Gt, true, Exec::default())?;
    let spec = match args.kind {
        ScorerKindArg::Bow => {
            let d = BowConfig::default();
            ScorerSpec::Bow(BowConfig {
                epochs: args.epochs.unwrap_or(d.epochs),
                learning_rate: args.learning_rate.unwrap_or(d.learning_rate),
                ..d
            })
        }
        // records carry no pixels here, so the image factor stays off
        ScorerKindArg::PromptNgram => ScorerSpec::PromptNgram(NgramConfig {
            smoothing_k: args.smoothing_k.unwrap_or(NgramConfig::default().smoothing_k),
            image_buckets: 0,
            ..NgramConfig::default()
        }),
    };
    let mut scorer = pipeline::train_scorer(&spec, &samples, &HashMap::new(), &schema, args.seed)?;
    if let Some(id) = &args.scorer_id {
        scorer.set_scorer_id(id.clone());
    }
    let mut json = serde_json::to_string_pretty(&scorer).expect("scorer serializes");
    json.push('\n');
    write_file(&args.out, &json)?;
    eprintln!("trained {} on {} captions", scorer.scorer_id(), samples.len());
    Ok(())
}

pub fn score(args: &ScoreArgs) -> CliResult<()> {
    let schema = schema_of(&args.schema)?;
    let source = std::fs::read_to_string(&args.scorer).map_err(|e| CliError::io(&args.scorer, e))?;
    let scorer: TrainedScorer =
        serde_json::from_str(&source).map_err(|e| CliError::data(format!("{}: {e}", args.scorer.display())))?;
    if scorer.classes() != schema.classes() {
        return Err(CliError::contract(format!(
            "scorer classes {:?} do not match schema classes {:?}",
            scorer.classes(),
            schema.classes()
        )));
    }
    let prompts: Vec<capbias::preproc::PromptSample> = read_jsonl(&args.prompts)?;
    let template_len = schema.template_tokens().len();
    if let Some(bad) = prompts.iter().find(|p| !p.is_well_formed() || p.prompt_tokens.len() <= template_len) {
        return Err(CliError::contract(format!("prompt {} lacks a terminal [Answer] slot", bad.sample_id)));
    }
    let dists = Exec::default().map(&prompts, |p| scorer.score(p, p.prompt_tokens.len() - template_len, None));
    write_file(&args.out, &write_interchange(&dists, &schema))?;
    eprintln!("scored {} prompts", dists.len());
    Ok(())
}

pub fn parse_fns(names: &[String]) -> CliResult<Vec<ScoringFunctionKind>> {
    names.iter().map(|n| n.trim().parse::<ScoringFunctionKind>().map_err(CliError::from)).collect()
}

pub fn report(args: &ReportArgs) -> CliResult<()> {
    let schema = schema_of(&args.schema)?;
    let records: Vec<CaptionRecord> = read_jsonl(&args.records)?;
    let gt = read_external_scores(&args.gt_scores, &schema)?;
    let model = read_external_scores(&args.model_scores, &schema)?;
    let mut cfg = EvalConfig::new(&args.model_id, ScorerSpec::External { gt, model });
    cfg.seed = args.seed;
    cfg.scoring_fns = parse_fns(&args.scoring_fns)?;
    let out = evaluate(&records, &schema, &cfg)?;
    write_file(&args.out_dir.join("report.csv"), &BiasReport::to_csv(&out.reports))?;
    write_file(&args.out_dir.join("report.json"), &BiasReport::to_json(&out.reports))?;
    print!("{}", BiasReport::render_table(&out.reports));
    Ok(())
}

pub fn metaeval(args: &MetaevalArgs) -> CliResult<()> {
    let matrix = ScoreMatrix::load(&args.matrix)?;
    let columns = matrix.variant_ids().to_vec();
    let pair_requested = args.rank || args.conflict || !args.pairs.is_empty();
    if pair_requested && columns.len() < 2 {
        return Err(CliError::config(format!(
            "usage: pair metrics need at least two columns, {} has {}",
            args.matrix.display(),
            columns.len()
        )));
    }
    if !pair_requested && args.human.is_none() && columns.len() < 2 {
        return Err(CliError::config("usage: nothing to compare; give --human or a matrix with two columns"));
    }
    let pairs: Vec<(String, String)> = if args.pairs.is_empty() {
        let mut all = Vec::new();
        for i in 0..columns.len() {
            for j in i + 1..columns.len() {
                all.push((columns[i].clone(), columns[j].clone()));
            }
        }
        all
    } else {
        args.pairs
            .iter()
            .map(|p| {
                p.split_once(':')
                    .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                    .ok_or_else(|| CliError::config(format!("usage: pair {p:?} is not of the form A:B")))
            })
            .collect::<CliResult<_>>()?
    };
    let (show_conflict, show_rank) = match (args.conflict, args.rank) {
        (false, false) => (true, true),
        flags => flags,
    };
    let method = if args.spearman { Correlation::Spearman } else { Correlation::Pearson };
    let corr_name = if args.spearman { "spearman" } else { "pearson" };

    let mut out = String::new();
    if !pairs.is_empty() && (show_conflict || show_rank) {
        out.push_str("column_a,column_b,conflict_pct,ranking_consistency\n");
        for (a, b) in &pairs {
            let ca = matrix.column(a)?;
            let cb = matrix.column(b)?;
            let conflict =
                if show_conflict { format!("{:.2}", 100.0 * conflict_score(&ca, &cb)?) } else { String::new() };
            let rank =
                if show_rank { format!("{:.4}", ranking_consistency(&matrix, a, b, method)?) } else { String::new() };
            out.push_str(&format!("{a},{b},{conflict},{rank}\n"));
        }
    }
    if let Some(path) = &args.human {
        let human = HumanScoreVector::load(path)?;
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!("column,human_alignment_{corr_name}\n"));
        for c in &columns {
            let value = human_alignment_with(&matrix, c, &human, method)?;
            out.push_str(&format!("{c},{value:.4}\n"));
        }
    }
    print!("{out}");
    if let Some(p) = &args.out {
        write_file(p, &out)?;
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    for (name, v) in [("gt-skew", args.gt_skew), ("model-skew", args.model_skew)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::config(format!("--{name} must lie in [0, 1], got {v}")));
        }
    }
    let records = generate(&SynthConfig {
        n_records: args.n,
        gt_captions_per_record: args.gt_per_record,
        gt_skew: args.gt_skew,
        model_skew: args.model_skew,
        seed: args.seed,
    });
    write_file(&args.out, &capbias::corpus::write_plain_tsv(&records))?;
    eprintln!("wrote {} records", records.len());
    Ok(())
}
