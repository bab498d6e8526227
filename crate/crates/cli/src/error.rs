use std::fmt;

use capbias::corpus::CorpusError;
use capbias::metaeval::MetaEvalError;
use capbias::metrics::MetricsError;
use capbias::pipeline::PipelineError;
use capbias::preproc::PreprocError;
use capbias::schema::SchemaError;
use capbias::scorer::ScorerError;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 2,
    Data = 3,
    Contract = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Data, message: message.into() }
    }

    pub fn contract(message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Contract, message: message.into() }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::data(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // one line, whatever the source error looked like
        write!(f, "CAPBIAS_ERR: {}", self.message.replace('\n', " "))
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        Self::config(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<PreprocError> for CliError {
    fn from(e: PreprocError) -> Self {
        match e {
            PreprocError::Image(_) | PreprocError::Io(_) => Self::data(e.to_string()),
            _ => Self::contract(e.to_string()),
        }
    }
}

fn scorer_kind(e: &ScorerError) -> ExitKind {
    match e {
        ScorerError::Contract(_) | ScorerError::InvalidDistribution(_) => ExitKind::Contract,
        _ => ExitKind::Data,
    }
}

impl From<ScorerError> for CliError {
    fn from(e: ScorerError) -> Self {
        Self { kind: scorer_kind(&e), message: e.to_string() }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::UnknownScoringFunction(_) => Self::config(e.to_string()),
            MetricsError::Arity { .. } | MetricsError::ZeroDenominator(_) => Self::contract(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<MetaEvalError> for CliError {
    fn from(e: MetaEvalError) -> Self {
        match e {
            MetaEvalError::UnknownColumn(_) => Self::config(e.to_string()),
            MetaEvalError::LengthMismatch(..) | MetaEvalError::TooShort { .. } | MetaEvalError::ZeroVariance => {
                Self::contract(e.to_string())
            }
            _ => Self::data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let kind = match &e {
            PipelineError::Corpus(_) | PipelineError::UnknownLabel { .. } | PipelineError::Image { .. } => {
                ExitKind::Data
            }
            PipelineError::Preproc { .. } => ExitKind::Contract,
            PipelineError::Scorer(s) => scorer_kind(s),
            PipelineError::Metrics { .. } => ExitKind::Data,
        };
        Self { kind, message: e.to_string() }
    }
}
