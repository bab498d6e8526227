//! Protected-attribute schemas and their masking lexicons.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::text::{self, ANSWER_TOKEN};

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("attribute schema needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("duplicate or empty class label {0:?}")]
    BadClass(String),
    #[error("lexicon names unknown class {0:?}")]
    UnknownLexiconClass(String),
    #[error("token {token:?} appears in the lexicons of both {first:?} and {second:?}")]
    OverlappingLexicons { token: String, first: String, second: String },
    #[error("lexicon token {0:?} is reserved")]
    ReservedLexiconToken(String),
    #[error("prompt template must contain exactly one [Answer] as its final token: {0:?}")]
    BadTemplate(String),
    #[error("class label {0:?} must tokenize to exactly one token")]
    MultiTokenClass(String),
    #[error("lexicon not found: {0}")]
    LexiconNotFound(String),
    #[error("lexicon {path}:{line}: {message}")]
    LexiconSyntax { path: String, line: usize, message: String },
    #[error("unknown builtin schema {0:?} (expected gender, race or emotion)")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A protected attribute with its classes, lexicons and prompt template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    name: String,
    classes: Vec<String>,
    mask_lexicon: BTreeMap<String, BTreeSet<String>>,
    neutral_lexicon: BTreeSet<String>,
    prompt_template: String,
    mask_images: bool,
}

/// Parsed contents of a lexicon file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    pub classes: BTreeMap<String, BTreeSet<String>>,
    pub neutral: BTreeSet<String>,
}

const MALE_WORDS: &[&str] = &["man", "men", "male", "boy", "boys", "he", "him", "his", "himself", "gentleman"];
const FEMALE_WORDS: &[&str] = &["woman", "women", "female", "girl", "girls", "she", "her", "hers", "herself", "lady"];

/// ArtEmis emotion categories. The free-form category is spelled as one token.
pub const EMOTION_CLASSES: &[&str] =
    &["amusement", "awe", "contentment", "excitement", "anger", "disgust", "fear", "sadness", "something-else"];

const SENTIMENT_WORDS: &[&str] = &[
    "amusing",
    "amused",
    "funny",
    "awe",
    "awesome",
    "amazing",
    "content",
    "calm",
    "peaceful",
    "happy",
    "joyful",
    "excited",
    "exciting",
    "angry",
    "anger",
    "disgust",
    "disgusting",
    "gross",
    "fear",
    "scary",
    "afraid",
    "frightening",
    "sad",
    "sadness",
    "gloomy",
    "lonely",
    "depressing",
    "melancholy",
];

impl AttributeSchema {
    pub fn new(
        name: impl Into<String>,
        classes: Vec<String>,
        mask_lexicon: BTreeMap<String, BTreeSet<String>>,
        neutral_lexicon: BTreeSet<String>,
        prompt_template: impl Into<String>,
        mask_images: bool,
    ) -> Result<Self, SchemaError> {
        let schema = Self {
            name: name.into(),
            classes,
            mask_lexicon: lowercase_sets(mask_lexicon),
            neutral_lexicon: neutral_lexicon.into_iter().map(|t| t.to_lowercase()).collect(),
            prompt_template: prompt_template.into(),
            mask_images,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Binary gender schema with the default lexicons.
    pub fn gender() -> Self {
        let lex = BTreeMap::from([("male".to_string(), set(MALE_WORDS)), ("female".to_string(), set(FEMALE_WORDS))]);
        Self::new(
            "gender",
            vec!["male".into(), "female".into()],
            lex,
            BTreeSet::new(),
            "Therefore, the gender is [Answer]",
            true,
        )
        .expect("builtin gender schema is valid")
    }

    /// Lighter/darker skin-tone schema. Ships without lexicons; supply one by file.
    pub fn race() -> Self {
        Self::new(
            "race",
            vec!["lighter".into(), "darker".into()],
            BTreeMap::new(),
            BTreeSet::new(),
            "Therefore, the race is [Answer]",
            true,
        )
        .expect("builtin race schema is valid")
    }

    /// Nine-way emotion schema. Only sentimental words are masked and images stay intact.
    pub fn emotion() -> Self {
        Self::new(
            "emotion",
            EMOTION_CLASSES.iter().map(|s| s.to_string()).collect(),
            BTreeMap::new(),
            set(SENTIMENT_WORDS),
            "Therefore, the emotion is [Answer]",
            false,
        )
        .expect("builtin emotion schema is valid")
    }

    pub fn builtin(name: &str) -> Result<Self, SchemaError> {
        match name {
            "gender" => Ok(Self::gender()),
            "race" => Ok(Self::race()),
            "emotion" => Ok(Self::emotion()),
            other => Err(SchemaError::UnknownBuiltin(other.to_string())),
        }
    }

    /// Replaces the lexicons with the ones from `lexicon`.
    pub fn with_lexicon(&self, lexicon: Lexicon) -> Result<Self, SchemaError> {
        Self::new(
            self.name.clone(),
            self.classes.clone(),
            lexicon.classes,
            lexicon.neutral,
            self.prompt_template.clone(),
            self.mask_images,
        )
    }

    fn validate(&self) -> Result<(), SchemaError> {
        if self.classes.len() < 2 {
            return Err(SchemaError::TooFewClasses(self.classes.len()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.classes {
            if c.is_empty() || !seen.insert(c.as_str()) {
                return Err(SchemaError::BadClass(c.clone()));
            }
            if text::tokenize(c) != [c.to_lowercase()] {
                return Err(SchemaError::MultiTokenClass(c.clone()));
            }
        }
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for (class, words) in &self.mask_lexicon {
            if !seen.contains(class.as_str()) {
                return Err(SchemaError::UnknownLexiconClass(class.clone()));
            }
            for w in words {
                if text::is_reserved(w) {
                    return Err(SchemaError::ReservedLexiconToken(w.clone()));
                }
                if let Some(prev) = owner.insert(w, class) {
                    return Err(SchemaError::OverlappingLexicons {
                        token: w.clone(),
                        first: prev.to_string(),
                        second: class.clone(),
                    });
                }
            }
        }
        if let Some(w) = self.neutral_lexicon.iter().find(|w| text::is_reserved(w)) {
            return Err(SchemaError::ReservedLexiconToken(w.clone()));
        }
        let toks = text::tokenize(&self.prompt_template);
        let answers = toks.iter().filter(|t| *t == ANSWER_TOKEN).count();
        if answers != 1 || toks.last().map(String::as_str) != Some(ANSWER_TOKEN) {
            return Err(SchemaError::BadTemplate(self.prompt_template.clone()));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn mask_lexicon(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.mask_lexicon
    }

    pub fn neutral_lexicon(&self) -> &BTreeSet<String> {
        &self.neutral_lexicon
    }

    pub fn prompt_template(&self) -> &str {
        &self.prompt_template
    }

    /// Template tokens, lowercased by the caption tokenizer.
    pub fn template_tokens(&self) -> Vec<String> {
        text::tokenize(&self.prompt_template)
    }

    pub fn mask_images(&self) -> bool {
        self.mask_images
    }

    /// Class revealed by a (lowercased) token, if any.
    pub fn class_of_token(&self, token: &str) -> Option<usize> {
        self.mask_lexicon.iter().find(|(_, words)| words.contains(token)).and_then(|(class, _)| self.class_index(class))
    }

    /// True when the token must be masked: any class lexicon or the neutral lexicon.
    pub fn is_masked_token(&self, token: &str) -> bool {
        self.neutral_lexicon.contains(token) || self.mask_lexicon.values().any(|w| w.contains(token))
    }
}

impl Lexicon {
    /// Parses `[class:NAME]` / `[neutral]` sections with one token per line.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(source: &str, origin: &str) -> Result<Self, SchemaError> {
        enum Section {
            None,
            Class(String),
            Neutral,
        }
        let mut lex = Lexicon::default();
        let mut section = Section::None;
        for (i, raw) in source.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: &str| SchemaError::LexiconSyntax {
                path: origin.to_string(),
                line: i + 1,
                message: message.to_string(),
            };
            if line.starts_with('[') && line.ends_with(']') {
                let inner = &line[1..line.len() - 1];
                section = if inner == "neutral" {
                    Section::Neutral
                } else if let Some(name) = inner.strip_prefix("class:") {
                    let name = name.trim();
                    if name.is_empty() {
                        return Err(syntax("empty class name"));
                    }
                    lex.classes.entry(name.to_string()).or_default();
                    Section::Class(name.to_string())
                } else {
                    return Err(syntax("unknown section header"));
                };
                continue;
            }
            if line.split_whitespace().count() != 1 {
                return Err(syntax("expected one token per line"));
            }
            let token = line.to_lowercase();
            match &section {
                Section::None => return Err(syntax("token outside of a section")),
                Section::Class(name) => {
                    lex.classes.get_mut(name).expect("section registered").insert(token);
                }
                Section::Neutral => {
                    lex.neutral.insert(token);
                }
            }
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let source = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => SchemaError::LexiconNotFound(path.display().to_string()),
            _ => SchemaError::Io(e),
        })?;
        Self::parse(&source, &path.display().to_string())
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (class, words) in &self.classes {
            out.push_str(&format!("[class:{class}]\n"));
            for w in words {
                out.push_str(w);
                out.push('\n');
            }
        }
        if !self.neutral.is_empty() {
            out.push_str("[neutral]\n");
            for w in &self.neutral {
                out.push_str(w);
                out.push('\n');
            }
        }
        out
    }
}

fn set(words: &[&str]) -> BTreeSet<String> {
    words.iter().map(|w| w.to_string()).collect()
}

fn lowercase_sets(map: BTreeMap<String, BTreeSet<String>>) -> BTreeMap<String, BTreeSet<String>> {
    map.into_iter().map(|(k, v)| (k, v.into_iter().map(|t| t.to_lowercase()).collect())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in ["gender", "race", "emotion"] {
            let s = AttributeSchema::builtin(name).unwrap();
            assert!(s.num_classes() >= 2);
            assert_eq!(s.template_tokens().last().unwrap(), ANSWER_TOKEN);
        }
        assert!(!AttributeSchema::emotion().mask_images());
    }

    #[test]
    fn gender_template_tokens() {
        assert_eq!(AttributeSchema::gender().template_tokens().join(" "), "therefore , the gender is [Answer]");
    }

    #[test]
    fn rejects_overlapping_lexicons() {
        let lex = BTreeMap::from([("a".to_string(), set(&["x", "y"])), ("b".to_string(), set(&["y"]))]);
        let err =
            AttributeSchema::new("t", vec!["a".into(), "b".into()], lex, BTreeSet::new(), "the t is [Answer]", true)
                .unwrap_err();
        assert!(matches!(err, SchemaError::OverlappingLexicons { .. }));
    }

    #[test]
    fn rejects_bad_templates() {
        for tpl in ["no slot here", "[Answer] first", "the [Answer] is [Answer]"] {
            let err =
                AttributeSchema::new("t", vec!["a".into(), "b".into()], BTreeMap::new(), BTreeSet::new(), tpl, true)
                    .unwrap_err();
            assert!(matches!(err, SchemaError::BadTemplate(_)), "{tpl}");
        }
    }

    #[test]
    fn rejects_single_class_and_unknown_lexicon_class() {
        assert!(matches!(
            AttributeSchema::new("t", vec!["a".into()], BTreeMap::new(), BTreeSet::new(), "[Answer]", true),
            Err(SchemaError::TooFewClasses(1))
        ));
        let lex = BTreeMap::from([("c".to_string(), set(&["x"]))]);
        assert!(matches!(
            AttributeSchema::new("t", vec!["a".into(), "b".into()], lex, BTreeSet::new(), "[Answer]", true),
            Err(SchemaError::UnknownLexiconClass(_))
        ));
    }

    #[test]
    fn lexicon_file_roundtrip() {
        let src = "# gender words\n[class:male]\nMan\nhe\n\n[class:female]\nwoman\n[neutral]\nsad\n";
        let lex = Lexicon::parse(src, "inline").unwrap();
        assert_eq!(lex.classes["male"], set(&["he", "man"]));
        assert_eq!(lex.neutral, set(&["sad"]));
        assert_eq!(Lexicon::parse(&lex.to_file_string(), "again").unwrap(), lex);
    }

    #[test]
    fn lexicon_syntax_errors_carry_line() {
        let err = Lexicon::parse("man\n", "f.txt").unwrap_err();
        assert!(matches!(err, SchemaError::LexiconSyntax { line: 1, .. }));
        let err = Lexicon::parse("[class:a]\ntwo words\n", "f.txt").unwrap_err();
        assert!(matches!(err, SchemaError::LexiconSyntax { line: 2, .. }));
        let err = Lexicon::load(Path::new("/nonexistent/lex.txt")).unwrap_err();
        assert!(err.to_string().starts_with("lexicon not found"));
    }

    #[test]
    fn token_lookup() {
        let g = AttributeSchema::gender();
        assert_eq!(g.class_of_token("his"), Some(0));
        assert_eq!(g.class_of_token("lady"), Some(1));
        assert_eq!(g.class_of_token("dog"), None);
        assert!(g.is_masked_token("women"));
    }
}
