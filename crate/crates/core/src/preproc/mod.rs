//! Attribute masking of captions and images, and prompt construction.

mod image;
mod mask;
mod prompt;

pub use image::{apply_region_mask, covered_pixels, gray_histogram, PixelGrid, RAW_HEADER_LEN};
pub use mask::{mask_caption, MaskedSample, MaskedText};
pub use prompt::{build_prompt, PromptSample};

#[derive(Debug, thiserror::Error)]
pub enum PreprocError {
    #[error("caption has no tokens")]
    EmptyCaption,
    #[error("region {index} is malformed")]
    MalformedRegion { index: usize },
    #[error("region {index} lies outside the {width}x{height} image")]
    OutOfBounds { index: usize, width: u32, height: u32 },
    #[error("prompt template lacks a terminal [Answer] slot")]
    MissingAnswerSlot,
    #[error("masked caption still contains lexicon token {0:?}")]
    LexiconSurvivor(String),
    #[error("image: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
