//! TOML run configuration.
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use capbias::corpus::CorpusFormat;
use capbias::metrics::ScoringFunctionKind;
use capbias::pipeline::TrainingMode;
use capbias::schema::{AttributeSchema, Lexicon, SchemaError};
use capbias::scorer::{BowConfig, NgramConfig};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "CAPBIAS_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model_id: String,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub masking: MaskingSection,
    pub scorer: ScorerSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatName {
    PlainTsv,
    Coco,
    Artemis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    pub format: FormatName,
    /// Builtin attribute schema: gender, race or emotion.
    pub attribute: String,
    /// `sample_id<TAB>label` sidecar, required for `coco`.
    pub attributes: Option<PathBuf>,
    /// Generated captions as TSV or a JSON results array.
    pub model_captions: Option<PathBuf>,
    /// JSON Lines region annotations.
    pub regions: Option<PathBuf>,
    pub image_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskingSection {
    /// Lexicon file replacing the schema's builtin lexicons.
    pub lexicon: Option<PathBuf>,
    #[serde(default = "yes")]
    pub mask_images: bool,
}

impl Default for MaskingSection {
    fn default() -> Self {
        Self { lexicon: None, mask_images: true }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKindName {
    Bow,
    PromptNgram,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerSection {
    pub kind: ScorerKindName,
    pub id: Option<String>,
    #[serde(default)]
    pub training: TrainingMode,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub min_count: Option<usize>,
    pub batch_size: Option<usize>,
    pub smoothing_k: Option<f64>,
    pub image_buckets: Option<usize>,
    /// Interchange files for `external`.
    pub gt_scores: Option<PathBuf>,
    pub model_scores: Option<PathBuf>,
}

impl ScorerSection {
    pub fn bow_config(&self) -> BowConfig {
        let d = BowConfig::default();
        BowConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            seed: d.seed,
            min_count: self.min_count.unwrap_or(d.min_count),
            batch_size: self.batch_size.or(d.batch_size),
        }
    }

    pub fn ngram_config(&self) -> NgramConfig {
        let d = NgramConfig::default();
        NgramConfig {
            smoothing_k: self.smoothing_k.unwrap_or(d.smoothing_k),
            seed: d.seed,
            image_buckets: self.image_buckets.unwrap_or(d.image_buckets),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default = "all_fns")]
    pub scoring_fns: Vec<ScoringFunctionKind>,
    /// Print the terminal table on the percent scale.
    #[serde(default = "yes")]
    pub percent: bool,
    /// Extra seeds for a mean and standard deviation of amplification.
    #[serde(default)]
    pub repeat_seeds: Vec<u64>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { scoring_fns: all_fns(), percent: true, repeat_seeds: Vec::new() }
    }
}

fn all_fns() -> Vec<ScoringFunctionKind> {
    ScoringFunctionKind::ALL.to_vec()
}

/// A parsed config plus what is needed to reproduce it.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub raw: String,
    pub seed_overridden: bool,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let raw =
            std::fs::read_to_string(path).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&raw).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        let seed_overridden = match std::env::var(SEED_ENV) {
            Ok(v) => {
                config.seed = v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::config(format!("{SEED_ENV} is not an unsigned integer: {v:?}")))?;
                true
            }
            Err(_) => false,
        };
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = Self { config, base_dir, raw, seed_overridden };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn validate(&self) -> CliResult<()> {
        let c = &self.config;
        if let Some(lex) = &c.masking.lexicon {
            let p = self.resolve(lex);
            if !p.is_file() {
                return Err(SchemaError::LexiconNotFound(p.display().to_string()).into());
            }
        }
        let mut required: Vec<(&str, &PathBuf)> = vec![("dataset.path", &c.dataset.path)];
        let optional = [
            ("dataset.attributes", &c.dataset.attributes),
            ("dataset.model_captions", &c.dataset.model_captions),
            ("dataset.regions", &c.dataset.regions),
            ("scorer.gt_scores", &c.scorer.gt_scores),
            ("scorer.model_scores", &c.scorer.model_scores),
        ];
        required.extend(optional.iter().filter_map(|(k, v)| v.as_ref().map(|p| (*k, p))));
        for (key, p) in required {
            let p = self.resolve(p);
            if !p.is_file() {
                return Err(CliError::config(format!("{key}: file not found: {}", p.display())));
            }
        }
        if let Some(dir) = &c.dataset.image_dir {
            if !self.resolve(dir).is_dir() {
                return Err(CliError::config(format!("dataset.image_dir: not a directory: {}", dir.display())));
            }
        }
        if c.dataset.format == FormatName::Coco && c.dataset.attributes.is_none() {
            return Err(CliError::config("dataset.attributes is required for the coco format"));
        }
        if c.scorer.kind == ScorerKindName::External
            && (c.scorer.gt_scores.is_none() || c.scorer.model_scores.is_none())
        {
            return Err(CliError::config("external scorer needs scorer.gt_scores and scorer.model_scores"));
        }
        if c.metrics.scoring_fns.is_empty() {
            return Err(CliError::config("metrics.scoring_fns is empty"));
        }
        if c.model_id.trim().is_empty() {
            return Err(CliError::config("model_id is empty"));
        }
        self.schema()?;
        Ok(())
    }

    pub fn schema(&self) -> CliResult<AttributeSchema> {
        load_schema(
            &self.config.dataset.attribute,
            self.config.masking.lexicon.as_ref().map(|p| self.resolve(p)).as_deref(),
        )
    }

    pub fn corpus_format(&self) -> CorpusFormat {
        corpus_format(self.config.dataset.format, self.config.dataset.attributes.as_ref().map(|p| self.resolve(p)))
    }
}

pub fn load_schema(attribute: &str, lexicon: Option<&Path>) -> CliResult<AttributeSchema> {
    let schema = AttributeSchema::builtin(attribute)?;
    match lexicon {
        Some(p) => Ok(schema.with_lexicon(Lexicon::load(p)?)?),
        None => Ok(schema),
    }
}

pub fn corpus_format(name: FormatName, attributes: Option<PathBuf>) -> CorpusFormat {
    match name {
        FormatName::PlainTsv => CorpusFormat::PlainTsv,
        FormatName::Artemis => CorpusFormat::ArtemisTable,
        FormatName::Coco => CorpusFormat::CocoCaptions { attributes: attributes.unwrap_or_default() },
    }
}
