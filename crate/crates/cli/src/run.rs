//! `capbias run`: the full two-stream evaluation driven by a config file.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use capbias::corpus::Ingested;
use capbias::metaeval::ScoreMatrix;
use capbias::metrics::BiasReport;
use capbias::par::Exec;
use capbias::pipeline::{evaluate, evaluate_seeds, EvalConfig, ScorerSpec};
use capbias::schema::AttributeSchema;
use capbias::scorer::{read_external_scores, write_interchange};

use crate::commands::{load_corpus, write_file};
use crate::config::{LoadedConfig, ScorerKindName};
use crate::error::{CliError, CliResult};
use crate::RunArgs;

#[derive(Serialize)]
struct Manifest<'a> {
    toolkit: &'static str,
    version: &'static str,
    config_sha256: String,
    seed: u64,
    seed_from_env: bool,
    model_id: &'a str,
    attribute: &'a str,
    records: usize,
    rejections: usize,
    /// sha256 of every other file written by the run.
    outputs: BTreeMap<String, String>,
    config: &'a crate::config::RunConfig,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn scorer_spec(loaded: &LoadedConfig, schema: &AttributeSchema) -> CliResult<ScorerSpec> {
    let s = &loaded.config.scorer;
    Ok(match s.kind {
        ScorerKindName::Bow => ScorerSpec::Bow(s.bow_config()),
        ScorerKindName::PromptNgram => ScorerSpec::PromptNgram(s.ngram_config()),
        ScorerKindName::External => {
            let gt = s.gt_scores.as_ref().expect("validated");
            let model = s.model_scores.as_ref().expect("validated");
            ScorerSpec::External {
                gt: read_external_scores(&loaded.resolve(gt), schema)?,
                model: read_external_scores(&loaded.resolve(model), schema)?,
            }
        }
    })
}

pub fn run(args: &RunArgs) -> CliResult<()> {
    let loaded = LoadedConfig::load(&args.config)?;
    let c = &loaded.config;
    let schema = loaded.schema()?;
    let resolve_opt = |p: &Option<std::path::PathBuf>| p.as_ref().map(|p| loaded.resolve(p));

    let Ingested { records, mut rejections } = load_corpus(
        &loaded.resolve(&c.dataset.path),
        &loaded.corpus_format(),
        &schema,
        resolve_opt(&c.dataset.model_captions).as_deref(),
        resolve_opt(&c.dataset.regions).as_deref(),
    )?;
    rejections.sort_by(|a, b| (a.line, &a.sample_id).cmp(&(b.line, &b.sample_id)));
    if records.iter().all(|r| r.model_caption.is_none()) {
        return Err(CliError::data("no record has a generated caption"));
    }

    let eval = EvalConfig {
        model_id: c.model_id.clone(),
        scorer: scorer_spec(&loaded, &schema)?,
        scorer_id: c.scorer.id.clone(),
        training: c.scorer.training,
        scoring_fns: c.metrics.scoring_fns.clone(),
        seed: c.seed,
        exec: if args.sequential { Exec::Sequential } else { Exec::default() },
        image_dir: resolve_opt(&c.dataset.image_dir),
        mask_images: c.masking.mask_images,
    };
    let out = evaluate(&records, &schema, &eval)?;

    let mut files: BTreeMap<String, String> = BTreeMap::new();
    files.insert("report.csv".into(), BiasReport::to_csv(&out.reports));
    files.insert("report.json".into(), BiasReport::to_json(&out.reports));
    files.insert("splits.tsv".into(), out.splits.to_tsv());
    files.insert(
        "rejections.tsv".into(),
        Ingested { records: Vec::new(), rejections: rejections.clone() }.rejection_report(),
    );
    files.insert("scores_gt.jsonl".into(), write_interchange(&out.gt_scores, &schema));
    files.insert("scores_model.jsonl".into(), write_interchange(&out.model_scores, &schema));
    if !out.scorers.is_empty() {
        let mut json = serde_json::to_string_pretty(&out.scorers).expect("scorers serialize");
        json.push('\n');
        files.insert("scorers.json".into(), json);
    }
    let scorer_id = out.reports.first().map(|r| r.scorer_id.clone()).unwrap_or_default();
    let matrix = ScoreMatrix::new(
        vec![c.model_id.clone()],
        out.reports.iter().map(|r| format!("{scorer_id}_{}", r.scoring_fn)).collect(),
        out.reports.iter().map(|r| r.reported_percent.b_amp).collect(),
    )?;
    files.insert("matrix.csv".into(), matrix.to_csv());
    if !c.metrics.repeat_seeds.is_empty() {
        let mut seeds = vec![c.seed];
        seeds.extend(c.metrics.repeat_seeds.iter().filter(|s| **s != c.seed));
        let summary = evaluate_seeds(&records, &schema, &eval, &seeds)?;
        let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        json.push('\n');
        files.insert("seeds.json".into(), json);
    }

    let manifest = Manifest {
        toolkit: "capbias",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: sha256_hex(loaded.raw.as_bytes()),
        seed: c.seed,
        seed_from_env: loaded.seed_overridden,
        model_id: &c.model_id,
        attribute: schema.name(),
        records: records.len(),
        rejections: rejections.len(),
        outputs: files.iter().map(|(k, v)| (k.clone(), sha256_hex(v.as_bytes()))).collect(),
        config: c,
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_json.push('\n');
    files.insert("manifest.json".into(), manifest_json);

    for (name, contents) in &files {
        write_file(&args.out_dir.join(name), contents)?;
    }
    if c.metrics.percent {
        print!("{}", BiasReport::render_table(&out.reports));
    } else {
        print!("{}", BiasReport::to_csv(&out.reports));
    }
    Ok(())
}
