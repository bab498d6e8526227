//! Bias scoring: the scoring-function family, stream aggregation,
//! amplification, and the caption-level baselines.

mod baseline;
mod cooccur;
mod report;
mod scoring;

pub use baseline::{error_rate, mention_ratio};
pub use cooccur::{cooccurrence_amplification, cooccurrence_bias, CooccurrenceTable};
pub use report::{BiasReport, ReportedPercent, REPORT_CSV_HEADER};
pub use scoring::{aggregate_bias, aggregate_bias_with, amplification, sample_score, ScoringFunctionKind};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty stream")]
    EmptyStream,
    #[error("sample {0:?} has no label")]
    MissingLabel(String),
    #[error("label {label:?} of sample {sample_id:?} is not a schema class")]
    UnknownLabel { sample_id: String, label: String },
    #[error("distribution for {sample_id:?} has {got} classes, schema has {expected}")]
    Arity { sample_id: String, expected: usize, got: usize },
    #[error("class {0:?} is not in the schema")]
    UnknownClass(String),
    #[error("no captions mention class {0:?}")]
    ZeroDenominator(String),
    #[error("no model caption mentions any attribute class")]
    NoAttributeMentions,
    #[error("unknown scoring function {0:?} (expected leakage, lic or ours)")]
    UnknownScoringFunction(String),
}
