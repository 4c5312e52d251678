//! Source texts to embed, as words or whole lines.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: invalid UTF-8 at byte {offset}")]
    EncodingError { path: String, offset: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Word,
    Line,
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(Granularity::Word),
            "line" => Ok(Granularity::Line),
            other => Err(format!("unknown granularity {other:?}")),
        }
    }
}

/// A text file and the language its contents are tagged with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSource {
    pub path: PathBuf,
    #[serde(default)]
    pub language: Option<String>,
}

impl From<PathBuf> for CorpusSource {
    fn from(path: PathBuf) -> Self {
        Self {
            path,
            language: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusUnit {
    pub text: String,
    pub language: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TextCorpus {
    pub units: Vec<CorpusUnit>,
    pub granularity: Granularity,
}

fn keeps_word(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}

/// Splits already-decoded text into units. Words are whitespace-separated
/// tokens with at least one letter or digit; lines are the non-blank lines,
/// kept verbatim apart from a trailing `\r`.
pub fn split_units(text: &str, granularity: Granularity) -> Vec<String> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    match granularity {
        Granularity::Word => text
            .split_whitespace()
            .filter(|t| keeps_word(t))
            .map(str::to_string)
            .collect(),
        Granularity::Line => text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect(),
    }
}

pub fn decode_utf8(bytes: Vec<u8>, path: &Path) -> Result<String, CorpusError> {
    String::from_utf8(bytes).map_err(|e| CorpusError::EncodingError {
        path: path.display().to_string(),
        offset: e.utf8_error().valid_up_to(),
    })
}

pub fn load_corpus(
    sources: &[CorpusSource],
    granularity: Granularity,
) -> Result<TextCorpus, CorpusError> {
    let mut units = Vec::new();
    for src in sources {
        let bytes = std::fs::read(&src.path).map_err(|source| CorpusError::Io {
            path: src.path.display().to_string(),
            source,
        })?;
        let text = decode_utf8(bytes, &src.path)?;
        units.extend(
            split_units(&text, granularity)
                .into_iter()
                .map(|text| CorpusUnit {
                    text,
                    language: src.language.clone(),
                }),
        );
    }
    Ok(TextCorpus { units, granularity })
}

impl TextCorpus {
    pub fn from_units<S: Into<String>>(
        units: impl IntoIterator<Item = S>,
        granularity: Granularity,
    ) -> Self {
        Self {
            units: units
                .into_iter()
                .map(|t| CorpusUnit {
                    text: t.into(),
                    language: None,
                })
                .collect(),
            granularity,
        }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }
}

pub fn sample_text<'a, R: Rng + ?Sized>(
    corpus: &'a TextCorpus,
    rng: &mut R,
) -> Result<&'a str, CorpusError> {
    if corpus.units.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(&corpus.units[rng.gen_range(0..corpus.units.len())].text)
}

pub const DEFAULT_MIX_RATIO: f64 = 0.5;

/// Dataset transcripts mixed with an external corpus. `ratio` is the share of
/// draws taken from the transcripts when both sides have units.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedCorpus {
    pub transcripts: TextCorpus,
    pub external: TextCorpus,
    pub ratio: f64,
}

impl MixedCorpus {
    pub fn is_empty(&self) -> bool {
        self.transcripts.is_empty() && self.external.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&str, CorpusError> {
        let side = match (self.transcripts.is_empty(), self.external.is_empty()) {
            (true, true) => return Err(CorpusError::EmptyCorpus),
            (false, true) => &self.transcripts,
            (true, false) => &self.external,
            (false, false) => {
                if rng.gen_bool(self.ratio.clamp(0.0, 1.0)) {
                    &self.transcripts
                } else {
                    &self.external
                }
            }
        };
        sample_text(side, rng)
    }
}
