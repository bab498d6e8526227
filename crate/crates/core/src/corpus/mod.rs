//! Evaluation records, annotation ingestion and balanced splits.

mod ingest;
mod split;

pub use ingest::{
    attach_model_captions, attach_regions, ingest_corpus, write_plain_tsv, CorpusFormat, Ingested, Rejection,
    RejectionReason,
};
pub use split::{make_splits, Split, SplitAssignment};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("insufficient data: class {class:?} has {count} records, need at least {needed}")]
    InsufficientData { class: String, count: usize, needed: usize },
    #[error("annotation file not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where the protected-attribute regions of a record came from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSource {
    GtMask,
    DetectorBox,
    #[default]
    None,
}

/// Pixel-space region hiding protected-attribute evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `[x_min, x_max) x [y_min, y_max)`.
    Box {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    Polygon(Vec<(f64, f64)>),
}

impl Region {
    pub fn bbox(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Region::Box { x_min, y_min, x_max, y_max }
    }

    /// Structural validity: ordered box corners, at least three polygon vertices.
    pub fn is_well_formed(&self) -> bool {
        match self {
            Region::Box { x_min, y_min, x_max, y_max } => {
                [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) && x_min < x_max && y_min < y_max
            }
            Region::Polygon(pts) => pts.len() >= 3 && pts.iter().all(|(x, y)| x.is_finite() && y.is_finite()),
        }
    }

    /// True when every vertex lies inside `[0, width] x [0, height]`.
    pub fn within(&self, width: u32, height: u32) -> bool {
        let (w, h) = (width as f64, height as f64);
        let inside = |x: f64, y: f64| (0.0..=w).contains(&x) && (0.0..=h).contains(&y);
        match self {
            Region::Box { x_min, y_min, x_max, y_max } => inside(*x_min, *y_min) && inside(*x_max, *y_max),
            Region::Polygon(pts) => pts.iter().all(|&(x, y)| inside(x, y)),
        }
    }
}

/// One evaluation unit: an image, its reference captions, the captioner's
/// output and the protected-attribute label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub sample_id: String,
    #[serde(default)]
    pub image_ref: Option<String>,
    pub gt_captions: Vec<String>,
    #[serde(default)]
    pub model_caption: Option<String>,
    pub attribute_label: String,
    #[serde(default)]
    pub regions: Vec<Region>,
    #[serde(default)]
    pub region_source: RegionSource,
}

impl CaptionRecord {
    pub fn new(sample_id: impl Into<String>, label: impl Into<String>, gt: impl Into<String>) -> Self {
        Self {
            sample_id: sample_id.into(),
            image_ref: None,
            gt_captions: vec![gt.into()],
            model_caption: None,
            attribute_label: label.into(),
            regions: Vec::new(),
            region_source: RegionSource::None,
        }
    }

    pub fn with_model_caption(mut self, caption: impl Into<String>) -> Self {
        self.model_caption = Some(caption.into());
        self
    }

    /// Caption scored for the ground-truth stream.
    pub fn primary_gt_caption(&self) -> &str {
        &self.gt_captions[0]
    }
}
