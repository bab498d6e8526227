//! Comparing bias metrics with each other and with human judgement.
//!
//! A [`ScoreMatrix`] holds amplification scores with one row per evaluated
//! captioner and one column per metric variant (scorer backend, metric name).
//! Two variants agree when they flag the same models as biased
//! ([`conflict_score`]) and rank them alike ([`ranking_consistency`]).

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum MetaEvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("model lists are misaligned: only in scores {only_scores:?}, only in human file {only_human:?}")]
    Misaligned { only_scores: Vec<String>, only_human: Vec<String> },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("score matrix invalid: {0}")]
    Invalid(String),
    #[error("file not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Correlation flavor for [`ranking_consistency`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    #[default]
    Pearson,
    Spearman,
}

/// Models x metric variants, row-major, percent scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    model_ids: Vec<String>,
    variant_ids: Vec<String>,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(model_ids: Vec<String>, variant_ids: Vec<String>, values: Vec<f64>) -> Result<Self, MetaEvalError> {
        if values.len() != model_ids.len() * variant_ids.len() {
            return Err(MetaEvalError::Invalid(format!(
                "{} values for {}x{} matrix",
                values.len(),
                model_ids.len(),
                variant_ids.len()
            )));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = model_ids.iter().find(|m| !seen.insert(m.as_str())) {
            return Err(MetaEvalError::Invalid(format!("duplicate model id {dup:?}")));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = variant_ids.iter().find(|v| !seen.insert(v.as_str())) {
            return Err(MetaEvalError::Invalid(format!("duplicate column {dup:?}")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(MetaEvalError::Invalid(format!("non-finite cell {v}")));
        }
        Ok(Self { model_ids, variant_ids, values })
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn variant_ids(&self) -> &[String] {
        &self.variant_ids
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.variant_ids.len() + col]
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, MetaEvalError> {
        let col = self
            .variant_ids
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| MetaEvalError::UnknownColumn(name.to_string()))?;
        Ok((0..self.model_ids.len()).map(|r| self.get(r, col)).collect())
    }

    /// CSV with a `model_id` first column and one column per variant.
    pub fn parse_csv(source: &str, origin: &str) -> Result<Self, MetaEvalError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source.as_bytes());
        let parse = |line: usize, message: String| MetaEvalError::Parse { path: origin.to_string(), line, message };
        let headers = reader.headers().map_err(|e| parse(1, e.to_string()))?.clone();
        if headers.get(0) != Some("model_id") {
            return Err(parse(1, "first column must be model_id".into()));
        }
        let variant_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut model_ids = Vec::new();
        let mut values = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| parse(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            model_ids.push(row[0].to_string());
            for cell in row.iter().skip(1) {
                values.push(cell.parse::<f64>().map_err(|_| parse(line, format!("not a number: {cell:?}")))?);
            }
        }
        Self::new(model_ids, variant_ids, values)
    }

    pub fn load(path: &Path) -> Result<Self, MetaEvalError> {
        Self::parse_csv(&read(path)?, &path.display().to_string())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("model_id,{}\n", self.variant_ids.join(","));
        for (r, m) in self.model_ids.iter().enumerate() {
            let cells: Vec<String> = (0..self.variant_ids.len()).map(|c| self.get(r, c).to_string()).collect();
            out.push_str(&format!("{m},{}\n", cells.join(",")));
        }
        out
    }
}

/// Human ground-truth scores per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanScoreVector {
    pub model_ids: Vec<String>,
    pub gt_scores: Vec<f64>,
}

impl HumanScoreVector {
    /// CSV `model_id,gt_score`.
    pub fn parse_csv(source: &str, origin: &str) -> Result<Self, MetaEvalError> {
        let m = ScoreMatrix::parse_csv(source, origin)?;
        if m.variant_ids() != ["gt_score"] {
            return Err(MetaEvalError::Parse {
                path: origin.to_string(),
                line: 1,
                message: "expected header model_id,gt_score".into(),
            });
        }
        Ok(Self { gt_scores: m.column("gt_score")?, model_ids: m.model_ids })
    }

    pub fn load(path: &Path) -> Result<Self, MetaEvalError> {
        Self::parse_csv(&read(path)?, &path.display().to_string())
    }
}

fn read(path: &Path) -> Result<String, MetaEvalError> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => MetaEvalError::NotFound(path.display().to_string()),
        _ => MetaEvalError::Io(e),
    })
}

/// Positive scores mean the model amplifies bias; zero does not.
fn biased(v: f64) -> bool {
    v > 0.0
}

/// Fraction of models whose biased / not-biased verdict differs between two columns.
pub fn conflict_score(col_a: &[f64], col_b: &[f64]) -> Result<f64, MetaEvalError> {
    if col_a.len() != col_b.len() {
        return Err(MetaEvalError::LengthMismatch(col_a.len(), col_b.len()));
    }
    if col_a.is_empty() {
        return Err(MetaEvalError::TooShort { needed: 1, got: 0 });
    }
    let flips = col_a.iter().zip(col_b).filter(|(a, b)| biased(**a) != biased(**b)).count();
    Ok(flips as f64 / col_a.len() as f64)
}

/// Product-moment correlation, computed from mean-centered values.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetaEvalError> {
    if x.len() != y.len() {
        return Err(MetaEvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetaEvalError::TooShort { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetaEvalError::ZeroVariance);
    }
    // sqrt(s * s) == s exactly, so a column against itself gives 1
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1; ties share their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, MetaEvalError> {
    if x.len() != y.len() {
        return Err(MetaEvalError::LengthMismatch(x.len(), y.len()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Correlation between two columns' raw scores across models.
pub fn ranking_consistency(
    matrix: &ScoreMatrix,
    col_a: &str,
    col_b: &str,
    method: Correlation,
) -> Result<f64, MetaEvalError> {
    let a = matrix.column(col_a)?;
    let b = matrix.column(col_b)?;
    match method {
        Correlation::Pearson => pearson(&a, &b),
        Correlation::Spearman => spearman(&a, &b),
    }
}

/// Pearson correlation of a metric column against human scores, matched by model id.
pub fn human_alignment(matrix: &ScoreMatrix, column: &str, human: &HumanScoreVector) -> Result<f64, MetaEvalError> {
    human_alignment_with(matrix, column, human, Correlation::Pearson)
}

pub fn human_alignment_with(
    matrix: &ScoreMatrix,
    column: &str,
    human: &HumanScoreVector,
    method: Correlation,
) -> Result<f64, MetaEvalError> {
    let scores = matrix.column(column)?;
    let human_by_id: HashMap<&str, f64> =
        human.model_ids.iter().map(String::as_str).zip(human.gt_scores.iter().copied()).collect();
    let ours: BTreeSet<&str> = matrix.model_ids.iter().map(String::as_str).collect();
    let theirs: BTreeSet<&str> = human_by_id.keys().copied().collect();
    if ours != theirs || human.model_ids.len() != human.gt_scores.len() {
        return Err(MetaEvalError::Misaligned {
            only_scores: ours.difference(&theirs).map(|s| s.to_string()).collect(),
            only_human: theirs.difference(&ours).map(|s| s.to_string()).collect(),
        });
    }
    let aligned: Vec<f64> = matrix.model_ids.iter().map(|m| human_by_id[m.as_str()]).collect();
    match method {
        Correlation::Pearson => pearson(&scores, &aligned),
        Correlation::Spearman => spearman(&scores, &aligned),
    }
}
