//! Measuring attribute-bias amplification in image captioning.
//!
//! Captions are masked so that no word names the protected attribute, turned
//! into answer-slot prompts, and scored by a classifier that tries to recover
//! the attribute from what remains. Comparing how well the attribute is
//! recovered from reference captions against generated captions gives the
//! amplification of the captioning model.

pub mod corpus;
pub mod metaeval;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod preproc;
pub mod schema;
pub mod scorer;
pub mod synth;
pub mod text;

use std::fmt;

use serde::{Deserialize, Serialize};

/// Whether a caption is a human reference or came from the model under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Gt,
    Model,
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stream::Gt => "gt",
            Stream::Model => "model",
        })
    }
}
