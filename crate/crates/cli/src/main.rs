mod commands;
mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "capbias", version, about = "Attribute-bias amplification for image captioning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read an annotation file into normalized caption records (JSON Lines).
    Ingest(IngestArgs),
    /// Mask captions and write answer-slot prompts (JSON Lines).
    Mask(MaskArgs),
    /// Train a built-in scorer on the reference captions of the train split.
    TrainScorer(TrainArgs),
    /// Score prompts with a trained scorer and write interchange records.
    Score(ScoreArgs),
    /// Aggregate interchange scores into bias reports.
    Report(ReportArgs),
    /// Conflict score, ranking consistency and human alignment of a score matrix.
    Metaeval(MetaevalArgs),
    /// Run the whole pipeline from a TOML config.
    Run(RunArgs),
    /// Write a synthetic gender corpus with a planted object skew.
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct SchemaArgs {
    /// Builtin attribute schema (gender, race, emotion).
    #[arg(long, default_value = "gender")]
    pub attribute: String,
    /// Lexicon file replacing the builtin lexicons.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FormatArg {
    PlainTsv,
    Coco,
    Artemis,
}

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "plain-tsv")]
    pub format: FormatArg,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// `sample_id<TAB>label` sidecar for the coco format.
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    #[arg(long)]
    pub model_captions: Option<PathBuf>,
    #[arg(long)]
    pub regions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write rejected records (TSV).
    #[arg(long)]
    pub rejections: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum StreamArg {
    Gt,
    Model,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Args)]
pub struct MaskArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long, value_enum, default_value = "gt")]
    pub stream: StreamArg,
    /// Keep only one split (assigned with --seed).
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ScorerKindArg {
    Bow,
    PromptNgram,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long, value_enum, default_value = "bow")]
    pub kind: ScorerKindArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub smoothing_k: Option<f64>,
    /// Identifier stored with the scorer and its scores.
    #[arg(long)]
    pub scorer_id: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Trained scorer JSON from train-scorer.
    #[arg(long)]
    pub scorer: PathBuf,
    #[arg(long)]
    pub prompts: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub gt_scores: PathBuf,
    #[arg(long)]
    pub model_scores: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long)]
    pub model_id: String,
    /// Seed of the split whose test part is evaluated.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated scoring functions.
    #[arg(long, value_delimiter = ',', default_value = "leakage,lic,ours")]
    pub scoring_fns: Vec<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct MetaevalArgs {
    /// CSV with a model_id column and one column per metric variant.
    #[arg(long)]
    pub matrix: PathBuf,
    /// CSV `model_id,gt_score` of human judgements.
    #[arg(long)]
    pub human: Option<PathBuf>,
    /// Column pairs `a:b` to compare; all pairs when omitted.
    #[arg(long = "pair", value_name = "A:B")]
    pub pairs: Vec<String>,
    /// Report ranking consistency (needs two columns).
    #[arg(long)]
    pub rank: bool,
    /// Report the conflict score (needs two columns).
    #[arg(long)]
    pub conflict: bool,
    /// Use Spearman instead of Pearson correlation.
    #[arg(long)]
    pub spearman: bool,
    /// Also write the table to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Disable data-parallel execution.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub gt_per_record: usize,
    #[arg(long, default_value_t = 0.6)]
    pub gt_skew: f64,
    #[arg(long, default_value_t = 0.9)]
    pub model_skew: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::config(format!("usage: {first}")));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Mask(a) => commands::mask(&a),
        Command::TrainScorer(a) => commands::train_scorer(&a),
        Command::Score(a) => commands::score(&a),
        Command::Report(a) => commands::report(&a),
        Command::Metaeval(a) => commands::metaeval(&a),
        Command::Run(a) => run::run(&a),
        Command::Synth(a) => commands::synth(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
