use std::collections::BTreeSet;

use super::MetricsError;
use crate::corpus::CaptionRecord;
use crate::schema::AttributeSchema;
use crate::text;

/// Classes revealed by lexicon hits in a caption.
fn mentioned_classes(caption: &str, schema: &AttributeSchema) -> BTreeSet<usize> {
    text::tokenize(caption).iter().filter_map(|t| schema.class_of_token(t)).collect()
}

/// Fraction of attribute-mentioning model captions that name a class other
/// than the record's label. Captions without hits are left out; captions
/// mixing classes count as errors.
pub fn error_rate(records: &[CaptionRecord], schema: &AttributeSchema) -> Result<f64, MetricsError> {
    let mut mentioned = 0usize;
    let mut errors = 0usize;
    for r in records {
        let Some(caption) = r.model_caption.as_deref() else {
            continue;
        };
        let label = schema.class_index(&r.attribute_label).ok_or_else(|| MetricsError::UnknownLabel {
            sample_id: r.sample_id.clone(),
            label: r.attribute_label.clone(),
        })?;
        let hits = mentioned_classes(caption, schema);
        if hits.is_empty() {
            continue;
        }
        mentioned += 1;
        if hits.iter().any(|&c| c != label) {
            errors += 1;
        }
    }
    if mentioned == 0 {
        return Err(MetricsError::NoAttributeMentions);
    }
    Ok(errors as f64 / mentioned as f64)
}

/// Model captions mentioning `numerator` divided by those mentioning `denominator`.
/// One plausible reading of a "ratio" column whose definition is not given; not authoritative.
pub fn mention_ratio(
    records: &[CaptionRecord],
    schema: &AttributeSchema,
    numerator: &str,
    denominator: &str,
) -> Result<f64, MetricsError> {
    let num = schema.class_index(numerator).ok_or_else(|| MetricsError::UnknownClass(numerator.to_string()))?;
    let den = schema.class_index(denominator).ok_or_else(|| MetricsError::UnknownClass(denominator.to_string()))?;
    let (mut n, mut d) = (0usize, 0usize);
    for caption in records.iter().filter_map(|r| r.model_caption.as_deref()) {
        let hits = mentioned_classes(caption, schema);
        n += usize::from(hits.contains(&num));
        d += usize::from(hits.contains(&den));
    }
    if d == 0 {
        return Err(MetricsError::ZeroDenominator(denominator.to_string()));
    }
    Ok(n as f64 / d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: usize, label: &str, model: &str) -> CaptionRecord {
        CaptionRecord::new(format!("r{id}"), label, "gt").with_model_caption(model)
    }

    #[test]
    fn contradiction_is_error_neutral_is_not() {
        let g = AttributeSchema::gender();
        assert_eq!(error_rate(&[rec(0, "female", "a man cooking")], &g).unwrap(), 1.0);
        assert!(matches!(
            error_rate(&[rec(0, "female", "a person cooking")], &g),
            Err(MetricsError::NoAttributeMentions)
        ));
        assert_eq!(
            error_rate(&[rec(0, "female", "a person cooking"), rec(1, "female", "a woman cooking")], &g).unwrap(),
            0.0
        );
    }

    #[test]
    fn ten_caption_fixture() {
        let g = AttributeSchema::gender();
        let mut recs: Vec<_> = (0..9)
            .map(|i| {
                if i % 2 == 0 {
                    rec(i, "male", "a man riding a bike")
                } else {
                    rec(i, "female", "a girl with her kite")
                }
            })
            .collect();
        recs.push(rec(9, "male", "a woman on a bench"));
        assert!((error_rate(&recs, &g).unwrap() - 0.10).abs() < 1e-15);
    }

    #[test]
    fn mixed_mentions_count_as_errors() {
        let g = AttributeSchema::gender();
        assert_eq!(error_rate(&[rec(0, "male", "a man and a woman")], &g).unwrap(), 1.0);
    }

    #[test]
    fn ratios() {
        let g = AttributeSchema::gender();
        let mut recs: Vec<_> = (0..20).map(|i| rec(i, "male", "a man")).collect();
        recs.extend((20..30).map(|i| rec(i, "female", "a woman")));
        assert_eq!(mention_ratio(&recs, &g, "male", "female").unwrap(), 2.0);
        let sym = vec![rec(0, "male", "a man"), rec(1, "female", "a lady")];
        assert_eq!(mention_ratio(&sym, &g, "male", "female").unwrap(), 1.0);
        let none = vec![rec(0, "male", "a man")];
        assert!(matches!(mention_ratio(&none, &g, "male", "female"), Err(MetricsError::ZeroDenominator(_))));
        assert!(matches!(mention_ratio(&none, &g, "male", "robot"), Err(MetricsError::UnknownClass(_))));
    }
}
