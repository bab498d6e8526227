//! JSON Lines interchange of per-sample class distributions.
//!
//! One object per line:
//! `{"sample_id": .., "stream": "gt"|"model", "scorer_id": .., "classes": [..], "probs": [..]}`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use super::distribution::SUM_TOLERANCE;
use super::{ClassDistribution, ScorerError};
use crate::schema::AttributeSchema;
use crate::Stream;

/// Accepted deviation of an incoming probability sum from 1.
pub const INTERCHANGE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterchangeLine {
    sample_id: String,
    stream: Stream,
    scorer_id: String,
    classes: Vec<String>,
    probs: Vec<f64>,
}

pub fn read_external_scores(path: &Path, schema: &AttributeSchema) -> Result<Vec<ClassDistribution>, ScorerError> {
    let source = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ScorerError::NotFound(path.display().to_string()),
        _ => ScorerError::Io(e),
    })?;
    parse_interchange(&source, schema)
}

/// Validates every line; the first violation aborts with its line number.
/// Sums within [`INTERCHANGE_SUM_TOLERANCE`] are accepted; those off by more than
/// [`SUM_TOLERANCE`] are renormalized, the rest are kept as written.
pub fn parse_interchange(source: &str, schema: &AttributeSchema) -> Result<Vec<ClassDistribution>, ScorerError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, raw) in source.split('\n').enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: InterchangeLine =
            serde_json::from_str(raw).map_err(|e| ScorerError::Record { line, message: e.to_string() })?;
        if rec.classes != schema.classes() {
            return Err(ScorerError::Schema { line, expected: schema.classes().to_vec(), got: rec.classes });
        }
        if rec.probs.len() != rec.classes.len() {
            return Err(ScorerError::Record {
                line,
                message: format!("{} probabilities for {} classes", rec.probs.len(), rec.classes.len()),
            });
        }
        if let Some(p) = rec.probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ScorerError::Record { line, message: format!("probability {p} outside [0, 1]") });
        }
        let sum: f64 = rec.probs.iter().sum();
        if (sum - 1.0).abs() > INTERCHANGE_SUM_TOLERANCE {
            return Err(ScorerError::Record { line, message: format!("probabilities sum to {sum}, not 1") });
        }
        if !seen.insert((rec.sample_id.clone(), rec.stream, rec.scorer_id.clone())) {
            return Err(ScorerError::Record {
                line,
                message: format!("duplicate key ({}, {}, {})", rec.sample_id, rec.stream, rec.scorer_id),
            });
        }
        let probs =
            if (sum - 1.0).abs() > SUM_TOLERANCE { rec.probs.iter().map(|p| p / sum).collect() } else { rec.probs };
        let dist = ClassDistribution::new(rec.sample_id, rec.stream, rec.scorer_id, probs)
            .map_err(|e| ScorerError::Record { line, message: e.to_string() })?;
        out.push(dist);
    }
    Ok(out)
}

/// Formats a float with 17 significant digits, enough to round-trip exactly.
fn number(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_interchange_line(dist: &ClassDistribution, schema: &AttributeSchema) -> String {
    let s = |v: &str| serde_json::to_string(v).expect("string serializes");
    let classes: Vec<String> = schema.classes().iter().map(|c| s(c)).collect();
    let probs: Vec<String> = dist.probs().iter().map(|&p| number(p)).collect();
    format!(
        "{{\"sample_id\":{},\"stream\":\"{}\",\"scorer_id\":{},\"classes\":[{}],\"probs\":[{}]}}\n",
        s(&dist.sample_id),
        dist.stream,
        s(&dist.scorer_id),
        classes.join(","),
        probs.join(",")
    )
}

pub fn write_interchange(dists: &[ClassDistribution], schema: &AttributeSchema) -> String {
    dists.iter().map(|d| format_interchange_line(d, schema)).collect()
}
