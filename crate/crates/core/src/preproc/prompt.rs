use serde::{Deserialize, Serialize};

use super::{MaskedSample, PreprocError};
use crate::schema::AttributeSchema;
use crate::text::ANSWER_TOKEN;
use crate::Stream;

/// Masked caption followed by the template; `[Answer]` is always last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSample {
    pub sample_id: String,
    pub prompt_tokens: Vec<String>,
    pub answer_classes: Vec<String>,
    pub stream: Stream,
}

impl PromptSample {
    /// Tokens before the answer slot.
    pub fn context(&self) -> &[String] {
        &self.prompt_tokens[..self.prompt_tokens.len().saturating_sub(1)]
    }

    pub fn is_well_formed(&self) -> bool {
        self.prompt_tokens.last().map(String::as_str) == Some(ANSWER_TOKEN)
            && self.prompt_tokens.iter().filter(|t| *t == ANSWER_TOKEN).count() == 1
    }

    pub fn text(&self) -> String {
        self.prompt_tokens.join(" ")
    }
}

pub fn build_prompt(
    masked: &MaskedSample,
    schema: &AttributeSchema,
    stream: Stream,
) -> Result<PromptSample, PreprocError> {
    let template = schema.template_tokens();
    if template.last().map(String::as_str) != Some(ANSWER_TOKEN)
        || template.iter().filter(|t| *t == ANSWER_TOKEN).count() != 1
    {
        return Err(PreprocError::MissingAnswerSlot);
    }
    let mut prompt_tokens = masked.masked_caption.clone();
    prompt_tokens.extend(template);
    Ok(PromptSample {
        sample_id: masked.sample_id.clone(),
        prompt_tokens,
        answer_classes: schema.classes().to_vec(),
        stream,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preproc::{mask_caption, MaskedText};

    fn masked(caption: &str, schema: &AttributeSchema) -> MaskedSample {
        MaskedSample::from_text("s", mask_caption(caption, schema).unwrap())
    }

    #[test]
    fn gender_prompt() {
        let g = AttributeSchema::gender();
        let p = build_prompt(&masked("a man at his laptop computer", &g), &g, Stream::Gt).unwrap();
        assert_eq!(p.text(), "a [MASK] at [MASK] laptop computer therefore , the gender is [Answer]");
        assert!(p.is_well_formed());
        assert_eq!(p.answer_classes, vec!["male", "female"]);
    }

    #[test]
    fn emotion_prompt_suffix() {
        let e = AttributeSchema::emotion();
        let p = build_prompt(&masked("a sad painting", &e), &e, Stream::Model).unwrap();
        assert!(p.text().ends_with("therefore , the emotion is [Answer]"));
        assert_eq!(p.stream, Stream::Model);
    }

    #[test]
    fn single_mask_caption() {
        let g = AttributeSchema::gender();
        let m = MaskedSample::from_text("s", MaskedText { tokens: vec!["[MASK]".into()], n_text_masks: 1 });
        let p = build_prompt(&m, &g, Stream::Gt).unwrap();
        assert_eq!(p.text(), "[MASK] therefore , the gender is [Answer]");
        assert_eq!(p.context().len(), p.prompt_tokens.len() - 1);
    }
}
