use serde::{Deserialize, Serialize};

use super::{PixelGrid, PreprocError};
use crate::schema::AttributeSchema;
use crate::text::{self, MASK_TOKEN};

/// Token-level result of masking one caption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedText {
    pub tokens: Vec<String>,
    pub n_text_masks: usize,
}

impl MaskedText {
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// A caption (and optionally its image) with every attribute clue removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedSample {
    pub sample_id: String,
    pub masked_caption: Vec<String>,
    #[serde(skip)]
    pub masked_image: Option<PixelGrid>,
    pub n_text_masks: usize,
    pub n_region_pixels_masked: usize,
}

impl MaskedSample {
    pub fn from_text(sample_id: impl Into<String>, text: MaskedText) -> Self {
        Self {
            sample_id: sample_id.into(),
            masked_caption: text.tokens,
            masked_image: None,
            n_text_masks: text.n_text_masks,
            n_region_pixels_masked: 0,
        }
    }

    pub fn with_image(mut self, image: PixelGrid, masked_pixels: usize) -> Self {
        self.masked_image = Some(image);
        self.n_region_pixels_masked = masked_pixels;
        self
    }

    /// Fails if any class or neutral lexicon token survived masking.
    pub fn check(&self, schema: &AttributeSchema) -> Result<(), PreprocError> {
        if self.masked_caption.is_empty() {
            return Err(PreprocError::EmptyCaption);
        }
        match self.masked_caption.iter().find(|t| schema.is_masked_token(&t.to_lowercase())) {
            Some(t) => Err(PreprocError::LexiconSurvivor(t.clone())),
            None => Ok(()),
        }
    }
}

/// Replaces every token found in a class lexicon or the neutral lexicon with
/// `[MASK]`. Matching is case-insensitive; other tokens keep their surface form.
pub fn mask_caption(caption: &str, schema: &AttributeSchema) -> Result<MaskedText, PreprocError> {
    let surface = text::surface_tokens(caption);
    if surface.is_empty() {
        return Err(PreprocError::EmptyCaption);
    }
    let mut n_text_masks = 0;
    let tokens = surface
        .into_iter()
        .map(|tok| {
            if !text::is_reserved(&tok) && schema.is_masked_token(&tok.to_lowercase()) {
                n_text_masks += 1;
                MASK_TOKEN.to_string()
            } else {
                tok
            }
        })
        .collect();
    Ok(MaskedText { tokens, n_text_masks })
}
